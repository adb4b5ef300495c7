"""
One dimensional periodic toy problems on D = [0, 1) showing the bias of the likelihood towards
nonscattered events and its removal by q.

Ground truth n delta_{x0}, measured as m events at x0 and n - m scattered events elsewhere.
The minimizers lie in the family rho = alpha delta_{x0} + beta sum_i delta_{x_i}.
"""
import numpy as np
import pandas as pd

from ..core import BaseDynpetObject


def toy_threshold_continuous(p_s, G0, m):
    """
    Smallest q for which the continuous toy (positron kernel of peak G0) is unbiased:

        q* = (1 - p_s) G0 / (p_s (m - 1))
    """
    _check_toy_args(p_s, m)
    if not G0 > 0:
        raise ValueError(f'G0 must be positive, got {G0}')
    return (1 - p_s) * G0 / (p_s * (m - 1))


def toy_threshold_discrete(p_s, M, m):
    """
    Same threshold with the detector length scale 1 / M instead of the positron length scale:

        q* = (1 - p_s) M / (p_s (m - 1))
    """
    _check_toy_args(p_s, m)
    if M < 2:
        raise ValueError(f'M must be >= 2, got {M}')
    return (1 - p_s) * M / (p_s * (m - 1))


def _check_toy_args(p_s, m):
    if not 0 < p_s < 1:
        raise ValueError(f'p_s must be in (0, 1), got {p_s}')
    if m < 2:
        raise ValueError(f'the threshold needs m >= 2 events at the source, got m={m}')


class ToyModel(BaseDynpetObject):
    """
    A toy measurement: n events, m of them at the source x0.

    Parameters
    ----------
    variant: str
        'continuous' (positron kernel of peak G0) or 'discrete' (M detector cells)
    p_s: float
        Scatter probability in (0, 1)
    n: int
        Number of events
    m: int
        Events at the source, 1 <= m <= n
    peak: float
        G0 (continuous) or M (discrete)
    positions: array or None
        Event positions in [0, 1) (continuous) or cell indices (discrete), source first.
        None places the scattered events evenly around the circle.
    """
    def __init__(self, variant, p_s, n, m, peak, positions=None):
        BaseDynpetObject.__init__(self)
        assert variant in ('continuous', 'discrete'), "variant must be 'continuous' or 'discrete'"
        n, m = int(n), int(m)
        if not 0 < p_s < 1:
            raise ValueError(f'p_s must be in (0, 1), got {p_s}')
        if not 1 <= m <= n:
            raise ValueError(f'need 1 <= m <= n, got m={m} n={n}')
        k = n - m
        if variant == 'continuous':
            if not peak > 0:
                raise ValueError(f'G0 must be positive, got {peak}')
            peak = float(peak)
        else:
            if int(peak) != peak or peak < 2:
                raise ValueError(f'M must be an integer >= 2, got {peak}')
            peak = int(peak)
            if k > peak - 1:
                raise ValueError(f'{k} scattered events do not fit in distinct cells of M={peak}')

        if positions is None:
            if variant == 'continuous':
                positions = (0.5 + np.arange(k + 1) / (k + 1)) % 1.
            else:
                positions = np.arange(k + 1)
        positions = np.asarray(positions)
        if positions.shape != (k + 1, ):
            raise ValueError(f'positions must have shape ({k + 1}, )')

        self.variant = variant
        self.p_s = float(p_s)
        self.n = n
        self.m = m
        self.peak = peak
        self.positions = positions
        self._kwargs = dict(variant=variant, p_s=self.p_s, n=n, m=m, peak=peak, positions=positions.tolist())

    def __repr__(self):
        name = 'G0' if self.variant == 'continuous' else 'M'
        return f'ToyModel ({self.variant}): p_s={self.p_s} n={self.n} m={self.m} {name}={self.peak}'

    @property
    def num_scattered(self):
        return self.n - self.m

    @property
    def detection_scale(self):
        """(1 - p_s) G0 or (1 - p_s) M."""
        return (1 - self.p_s) * self.peak

    def threshold(self):
        if self.variant == 'continuous':
            return toy_threshold_continuous(self.p_s, self.peak, self.m)
        return toy_threshold_discrete(self.p_s, self.peak, self.m)

    def is_separated(self):
        """
        True when the minimizer family is exact: scattered events farther than the kernel
        width 1 / G0 from each other (continuous), or in distinct cells (discrete).
        """
        if self.variant == 'discrete':
            return np.unique(self.positions).size == self.positions.size
        x = np.sort(self.positions)
        gaps = np.diff(np.concatenate([x, [x[0] + 1.]]))
        return bool(np.min(gaps) >= 1. / self.peak) if x.size > 1 else True

    def objective(self, alpha, beta, q):
        """
        J^{E,q} on the family alpha delta_{x0} + beta sum_i delta_{x_i} (broadcasts over arrays).
        """
        alpha = np.asarray(alpha, dtype='float64')
        beta = np.asarray(beta, dtype='float64')
        k = self.num_scattered
        mass = alpha + k * beta
        a = q * self.p_s
        c = self.detection_scale
        with np.errstate(divide='ignore', invalid='ignore'):
            value = mass - self.m * np.log(a * mass + c * alpha)
            if k > 0:
                value = value - k * np.log(a * mass + c * beta)
        value = np.where(np.isnan(value), np.inf, value)
        if self.variant == 'discrete':
            # densities are taken against the counting measure on cell centers
            value = value + self.n * np.log(self.peak)
        value = np.where((alpha < 0) | (beta < 0), np.inf, value)
        return value[()] if value.ndim == 0 else value


def solve_toy(toy, q):
    """
    Minimizer (alpha, beta) of the toy functional for a given q >= 0.

    At a minimizer the total mass equals n (the functional is mass minus n log of a one
    homogeneous term), and on that line the first order condition in beta is linear:

        beta = max(0, 1 - q p_s (m - 1) / ((1 - p_s) peak))

    Returns
    -------
    alpha: float
    beta: float
        0 exactly when q >= q*
    """
    if q < 0:
        raise ValueError(f'q must be nonnegative, got {q}')
    k = toy.num_scattered
    if k == 0:
        return float(toy.n), 0.
    beta = 1. - q * toy.p_s * (toy.m - 1) / toy.detection_scale
    beta = min(max(beta, 0.), toy.n / k)
    return float(toy.n - k * beta), float(beta)


def brute_force_toy(toy, q, resolution=1000, alpha_max=None, beta_max=2.):
    """
    Grid search of the toy functional over (alpha, beta) in [0, alpha_max] x [0, beta_max].

    Returns
    -------
    alpha: float
    beta: float
    value: float
    """
    if alpha_max is None:
        alpha_max = 2. * toy.n
    alphas = np.linspace(0., alpha_max, resolution)
    betas = np.linspace(0., beta_max, resolution)
    values = toy.objective(alphas[:, None], betas[None, :], q)
    i, j = np.unravel_index(np.argmin(values), values.shape)
    return float(alphas[i]), float(betas[j]), float(values[i, j])


def toy_switch_q(toy, rtol=1e-10, max_iters=200):
    """
    Bisection on q for the switch between biased (beta > 0) and unbiased (beta = 0) minimizers.

    Returns
    -------
    q_switch: float
        np.inf when every q is biased (m = 1)
    """
    if toy.num_scattered == 0:
        return 0.
    if toy.m < 2:
        return np.inf

    def biased(q):
        return solve_toy(toy, q)[1] > 0

    low, high = 0., 1.
    for _ in range(max_iters):
        if not biased(high):
            break
        low, high = high, 2 * high
    for _ in range(max_iters):
        if high - low <= rtol * high:
            break
        mid = (low + high) / 2
        if biased(mid):
            low = mid
        else:
            high = mid
    return (low + high) / 2


def toy_bias_table(toy, q_values):
    """
    Minimizers and minimum along a list of q.

    Returns
    -------
    table: pd.DataFrame
        Columns q, alpha, beta, J, biased
    """
    rows = []
    for q in q_values:
        alpha, beta = solve_toy(toy, q)
        rows.append(dict(q=float(q), alpha=alpha, beta=beta, J=float(toy.objective(alpha, beta, q)),
                         biased=bool(beta > 0)))
    return pd.DataFrame(rows, columns=['q', 'alpha', 'beta', 'J', 'biased'])
