"""
Spatiotemporal rescaling of measurements, solutions and parameters.

A scale (theta, lambda, mu) maps time t to t / theta, space x to x / lambda and mass to
mass / mu. The reconstruction functional is invariant up to an additive constant when
the data, the unknowns and the parameters are rescaled together:

    beta -> beta mu lambda^2 / theta,  T_half -> T_half / (mu theta),  T -> T / theta,  D -> D / lambda
"""
import numpy as np

from ..core import BaseDynpetObject, ScannerGeometry, GridSpec, GridMeasure
from ..listmode import Listmode, GroundTruth


class ScaleTriple(BaseDynpetObject):
    """
    Time, length and mass scales.

    Parameters
    ----------
    theta: float
        Time scale
    lam: float
        Length scale
    mu: float
        Mass scale
    """
    def __init__(self, theta=1., lam=1., mu=1.):
        BaseDynpetObject.__init__(self)
        for name, value in (('theta', theta), ('lam', lam), ('mu', mu)):
            if not (np.isfinite(value) and value > 0):
                raise ValueError(f'{name} must be positive, got {value}')
        self.theta = float(theta)
        self.lam = float(lam)
        self.mu = float(mu)
        self._kwargs = dict(theta=self.theta, lam=self.lam, mu=self.mu)

    def __repr__(self):
        return f'ScaleTriple: theta={self.theta:g} lambda={self.lam:g} mu={self.mu:g}'

    def is_identity(self):
        return self.theta == 1. and self.lam == 1. and self.mu == 1.

    def inverse(self):
        return ScaleTriple(1. / self.theta, 1. / self.lam, 1. / self.mu)

    @classmethod
    def random(cls, rng, low=0.5, high=2.):
        theta, lam, mu = rng.uniform(low, high, size=3)
        return cls(theta, lam, mu)


def rescaled_parameters(beta, T_half, T, radius_D, scale):
    """
    Parameters of the rescaled problem.

    Returns
    -------
    beta_hat: float
        beta mu lambda^2 / theta
    T_half_hat: float
        T_half / (mu theta)
    T_hat: float
        T / theta
    radius_D_hat: float
        radius_D / lambda
    """
    return (beta * scale.mu * scale.lam ** 2 / scale.theta, T_half / (scale.mu * scale.theta),
            T / scale.theta, radius_D / scale.lam)


# keys of a parameter dict and the power of (theta, lambda, mu) they are multiplied by
_parameter_powers = {
    'beta': (-1, 2, 1),
    'T_half': (-1, 0, -1),
    'T': (-1, 0, 0),
    'radius_D': (0, -1, 0),
    'radius_Dd': (0, -1, 0),
    'delta': (0, -1, 0),
    'sigma': (0, -1, 0),
    'center': (0, -1, 0),
    'speed': (1, -1, 0),
    'mass': (0, 0, -1),
}


def rescale_model_parameters(params, scale):
    """
    Rescale a flat dict of model and scene parameters. Unknown keys (probabilities, counts,
    grid sizes, q) are scale free and copied. None values (no positron range) stay None.
    """
    rescaled = {}
    for key, value in params.items():
        if key in _parameter_powers and value is not None:
            p_t, p_x, p_m = _parameter_powers[key]
            factor = scale.theta ** p_t * scale.lam ** p_x * scale.mu ** p_m
            if isinstance(value, (list, tuple, np.ndarray)):
                value = (np.asarray(value, dtype='float64') * factor).tolist()
            else:
                value = float(value) * factor
        rescaled[key] = value
    return rescaled


def rescale_geometry(geometry, scale):
    return ScannerGeometry(geometry.dim, geometry.radius_D / scale.lam, geometry.radius_Dd / scale.lam,
                           geometry.n_detectors, geometry.n_bins, geometry.T / scale.theta,
                           center=geometry.center / scale.lam)


def rescale_model(model, scale, geometry=None):
    """
    The forward model of the rescaled problem: same grid sizes and probabilities on the rescaled
    geometry, kernel width sigma / lambda and half life T_half / (mu theta).
    """
    if geometry is None:
        geometry = rescale_geometry(model.geometry, scale)
    sigma = model.kernel.sigma
    return model.clone(geometry=geometry, sigma=None if sigma is None else sigma / scale.lam,
                       T_half=model.T_half / (scale.mu * scale.theta))


def rescale_measurement(listmode, scale, geometry=None):
    """
    Pushforward of the events by (t, a, b) -> (t / theta, a / lambda, b / lambda).

    Parameters
    ----------
    listmode: Listmode
        Continuous listmode
    scale: ScaleTriple
    geometry: ScannerGeometry or None
        The rescaled geometry (computed if None)

    Returns
    -------
    listmode_hat: Listmode
    """
    if listmode.mode != 'continuous':
        raise ValueError('discrete events are bin indices and do not rescale, use a continuous listmode')
    if geometry is None:
        geometry = rescale_geometry(listmode.geometry, scale)
    events = listmode.events.copy()
    events['t'] = events['t'] / scale.theta
    events['a'] = events['a'] / scale.lam
    events['b'] = events['b'] / scale.lam
    # t = T must stay inside [0, T_hat] after rounding
    events['t'] = np.minimum(events['t'], geometry.T)
    return Listmode(events, geometry, mode='continuous', seed=listmode.seed)


def rescale_solution(grid_measure, scale, grid=None):
    """
    Rescale a grid measure: rho -> rho / (mu theta), eta -> eta / (mu lambda) on the grid of the
    rescaled geometry with the same voxel and bin counts, so the discrete continuity equation,
    the masses and the transport energy transform exactly.

    Parameters
    ----------
    grid_measure: GridMeasure
    scale: ScaleTriple
    grid: GridSpec or None
        Target grid (the rescaled geometry with the same nx if None)

    Returns
    -------
    grid_measure_hat: GridMeasure
    """
    source = grid_measure.grid
    if grid is None:
        grid = GridSpec(rescale_geometry(source.geometry, scale), source.nx)
    if grid.nx != source.nx or grid.n_bins != source.n_bins or grid.dim != source.dim:
        raise ValueError(f'{grid} is not the voxel for voxel image of {source}')
    rho = grid_measure.rho / (scale.mu * scale.theta)
    eta = [e / (scale.mu * scale.lam) for e in grid_measure.eta]
    return GridMeasure(grid, rho, eta)


def rescale_ground_truth(ground_truth, scale, geometry=None):
    """
    Masses per unit time divided by mu, knots by lambda and the half life by mu theta.
    """
    if geometry is None:
        geometry = rescale_geometry(ground_truth.geometry, scale)
    return GroundTruth(geometry, ground_truth.masses / scale.mu, ground_truth.knots / scale.lam,
                       T_half=ground_truth.T_half / (scale.mu * scale.theta))


def log_density_factor(model, scale):
    """
    log kappa, where every event density of the rescaled problem is kappa times the original one:
    kappa = lambda^(2 dim - 2) theta for continuous events, 1 for binned events.

    J(rho, eta) - J_hat(rho_hat, eta_hat) = |E| log kappa.
    """
    if model.mode == 'discrete':
        return 0.
    return (2 * model.geometry.dim - 2) * np.log(scale.lam) + np.log(scale.theta)
