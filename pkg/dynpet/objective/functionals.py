import numpy as np

from ..core import GridMeasure, check_json
from ..forward import EventOperator


class ObjectiveValue:
    """
    Value of the reconstruction functional split in its three parts.

    total = fidelity_mass + neg_log + bb when feasible, +inf otherwise.

    Parameters
    ----------
    fidelity_mass: float
        The mass term (p_s + p_d) ||rho|| / T_half
    neg_log: float
        -sum_e log(density at e)
    bb: float
        beta * S(rho, eta)
    feasible: bool
        False if rho < 0 somewhere, the continuity equation is violated or an event density vanishes
    residual: float
        L1 continuity residual (informative)
    """
    def __init__(self, fidelity_mass, neg_log, bb, feasible=True, residual=0.):
        self.fidelity_mass = float(fidelity_mass)
        self.neg_log = float(neg_log)
        self.bb = float(bb)
        self.residual = float(residual)
        total = self.fidelity_mass + self.neg_log + self.bb
        self.feasible = bool(feasible) and np.isfinite(total)
        self.total = total if self.feasible else np.inf

    @classmethod
    def infeasible(cls, residual=np.inf):
        return cls(np.inf, np.inf, np.inf, feasible=False, residual=residual)

    def __repr__(self):
        if not self.feasible:
            return 'ObjectiveValue: inf (infeasible)'
        return (f'ObjectiveValue: {self.total:.8g} (mass={self.fidelity_mass:.6g} '
                f'neg_log={self.neg_log:.6g} bb={self.bb:.6g})')

    def __float__(self):
        return float(self.total)

    def to_dict(self):
        return check_json(dict(total=self.total, fidelity_mass=self.fidelity_mass, neg_log=self.neg_log,
                               bb=self.bb, feasible=self.feasible, residual=self.residual))


def _face_means(rho, axis):
    # rho: (N, nx, ..., nx), faces along spatial axis `axis`
    n = rho.shape[axis + 1]
    left = np.take(rho, np.arange(n - 1), axis=axis + 1)
    right = np.take(rho, np.arange(1, n), axis=axis + 1)
    return 0.5 * (left + right)


def benamou_brenier(grid_measure):
    """
    Discrete Benamou-Brenier energy S(rho, eta) = sum over faces of |eta_f|^2 / rho_f, with rho_f
    the mean of the two voxels adjacent to face f. By convention 0 / 0 = 0 and c / 0 = inf.

    A particle of mass m moving at speed v during T gives m v^2 T.

    Returns
    -------
    value: float in [0, inf]
    """
    rho = grid_measure.rho
    total = 0.
    for k, eta in enumerate(grid_measure.eta):
        rho_f = _face_means(rho, k)
        if eta.shape != rho_f.shape:
            raise ValueError('eta does not match the grid of rho')
        moving = eta != 0
        if np.any(rho_f[moving] <= 0):
            return np.inf
        total += float(np.sum(eta[moving] ** 2 / rho_f[moving]))
    return total


def staggered_divergence(grid_measure):
    """
    Outflow of every voxel, per time slice, with no flux through the box boundary.
    """
    grid = grid_measure.grid
    div = np.zeros(grid.rho_shape())
    for k, eta in enumerate(grid_measure.eta):
        pad = [(0, 0)] * eta.ndim
        pad[k + 1] = (1, 1)
        div += np.diff(np.pad(eta, pad), axis=k + 1)
    return div


def continuity_residual(grid_measure):
    """
    rho[t + 1] - rho[t] + dT / h * div(eta[t]) for t = 0 ... N - 2.
    """
    grid = grid_measure.grid
    c = grid.geometry.bin_width / grid.h
    div = staggered_divergence(grid_measure)
    return grid_measure.rho[1:] - grid_measure.rho[:-1] + c * div[:-1]


def check_continuity(grid_measure):
    """
    Residual of the discrete continuity equation.

    Returns
    -------
    residual_max: float
        Max absolute residual
    residual_l1: float
        Sum of the absolute residuals
    """
    r = continuity_residual(grid_measure)
    if r.size == 0:
        return 0., 0.
    return float(np.max(np.abs(r))), float(np.sum(np.abs(r)))


def evaluate_J(grid_measure, listmode, model, q=1., beta=1., continuity_tol=1e-8, event_operator=None):
    """
    The reconstruction functional

        J(rho, eta) = (p_s + p_d) ||rho|| / T_half - sum_e log(d A^q rho / d nu (e)) + beta S(rho, eta)

    with J = inf if rho has negative entries or mass outside D, if the continuity residual exceeds
    continuity_tol * ||rho|| or if some event has zero density.

    Parameters
    ----------
    grid_measure: GridMeasure
        (rho, eta) on the model grid
    listmode: Listmode
        The events E
    model: ForwardModel
        Gives p_s, p_d, T_half, the kernel and the measurement mode
    q: float
        Debiasing parameter (q = 1 is the unbiased MAP functional)
    beta: float
        Weight of the transport regularization
    continuity_tol: float
        Relative tolerance on the L1 continuity residual (np.inf to skip the check)
    event_operator: EventOperator or None
        Precomputed operator for (model, listmode, q)

    Returns
    -------
    value: ObjectiveValue
    """
    if q < 0:
        raise ValueError(f'q must be nonnegative, got {q}')
    grid = model.grid
    if grid_measure.grid.rho_shape() != grid.rho_shape():
        raise ValueError('grid measure does not match the model grid')

    rho = grid_measure.rho
    if np.any(rho < 0) or grid_measure.mass_outside_mask() > 0:
        return ObjectiveValue.infeasible()

    mass = float(np.sum(rho))
    _, residual = check_continuity(grid_measure)
    if residual > continuity_tol * mass:
        return ObjectiveValue.infeasible(residual)

    fidelity_mass = model.intensity_rate * mass

    neg_log = 0.
    if len(listmode) > 0:
        if event_operator is None:
            event_operator = EventOperator(model, listmode, q)
        rho_mask = rho.reshape(grid.n_bins, -1)[:, grid.mask_indices]
        density = event_operator.matvec(rho_mask)
        if np.any(density <= 0):
            return ObjectiveValue(fidelity_mass, np.inf, 0., feasible=False, residual=residual)
        neg_log = -float(np.sum(event_operator.weights * np.log(density)))

    bb = 0.
    if beta != 0:
        bb = beta * benamou_brenier(grid_measure)
    return ObjectiveValue(fidelity_mass, neg_log, bb, feasible=np.isfinite(bb), residual=residual)


def coercivity_bound(grid_measure, listmode, model, q=1., beta=1.):
    """
    A priori bounds on ||rho|| and ||eta||_1 from the value of J.

    With alpha = (p_s + p_d) / T_half and densities <= c ||rho|| for conservative rho,
    J >= alpha ||rho|| / 2 - |E| log(2 c |E| / alpha) + beta S, so

        ||rho|| <= 2 (J + K) / alpha,  S <= (J + K) / beta,  ||eta||_1 <= sqrt(dim ||rho|| S)

    with K = |E| log(2 c |E| / alpha).

    Returns
    -------
    mass_bound: float
    flux_bound: float
    """
    value = evaluate_J(grid_measure, listmode, model, q=q, beta=beta)
    if not value.feasible:
        return np.inf, np.inf
    alpha = model.intensity_rate
    num_events = float(len(listmode))
    c_upper = model.bound_constant(q).c_upper
    K = num_events * np.log(2 * c_upper * num_events / alpha) if num_events > 0 else 0.
    budget = max(value.total + K, 0.)
    mass_bound = 2 * budget / alpha
    flux_bound = np.sqrt(model.geometry.dim * mass_bound * budget / beta) if beta > 0 else np.inf
    return mass_bound, flux_bound


def uniform_measure(model, num_events):
    """
    Static uniform measure whose expected number of events is num_events.
    """
    if not model.intensity_rate > 0:
        raise ValueError('p_s + p_d must be positive')
    mass = num_events / model.intensity_rate if num_events > 0 else 0.
    return GridMeasure.uniform(model.grid, mass)


def infimum_bound(listmode, model, q=1., beta=1.):
    """
    Upper bound of inf J: J at the uniform static measure of mass |E| T_half / (p_s + p_d).
    """
    return evaluate_J(uniform_measure(model, len(listmode)), listmode, model, q=q, beta=beta)
