"""
Primal dual (Chambolle-Pock) reconstruction on the voxel grid.

The unknown is x = (rho[0], eta) in the masked numbering. rho[t] is recovered by time stepping
the discrete continuity equation, so every iterate is conservative and satisfies the
continuity equation to rounding. The functional then reads

    min_x  <g, x> + F_bb(K_bb x) + F_log(K_log x) + F_pos(K_pos x)

with g the mass term, F_bb the perspective b^2 / a on every face (a = face mean of rho,
b = sqrt(beta) eta), F_log = -sum_r w_r log(z_r) on the event rows and F_pos the indicator of
rho >= 0. Each block is rescaled to unit norm before the joint step sizes are chosen.
The run stops on the relative duality gap estimate of duality_gap, computed every log_every
iterations and whenever the primal dual residual falls below tol.
"""
import numpy as np
import scipy.sparse.linalg
from tqdm import tqdm

from ..core import mask_arrays_to_measure, measure_to_mask_arrays, GridMeasure
from ..forward import EventOperator
from ..objective import evaluate_J, uniform_measure, check_continuity
from .basesolver import BaseSolver, Reconstruction, DynpetSolverError


_tiny = 1e-300


def prox_neglog(x, tau, w):
    """
    Proximal map of s -> -w log(s) with step tau, the positive root of s^2 - x s - tau w = 0:

        (x + sqrt(x^2 + 4 tau w)) / 2

    Values below 1e-300 are clamped.
    """
    x = np.asarray(x, dtype='float64')
    root = np.sqrt(x ** 2 + 4 * tau * w)
    with np.errstate(divide='ignore', invalid='ignore'):
        # the second form has no cancellation for negative x
        out = np.where(x >= 0, (x + root) / 2, 2 * tau * w / (root - x))
    return np.maximum(out, _tiny)


def project_parabola(p, q, num_iters=30):
    """
    Euclidean projection of (p, q) onto the set {p + q^2 / 4 <= 0}, the domain of the conjugate
    of the perspective q^2 / p.

    The projection is (p - 2 (u - 1), q / u) with u >= 1 the largest root of
    8 u^3 - 4 (p + 2) u^2 - q^2 = 0, found by Newton iterations from an upper bound.
    """
    p = np.asarray(p, dtype='float64')
    q = np.asarray(q, dtype='float64')
    outside = p + q ** 2 / 4 > 0
    if not np.any(outside):
        return p.copy(), q.copy()
    p0, q0 = p[outside], q[outside]
    u = np.maximum(1., (p0 + 2) / 2) + q0 ** 2 / 8
    for i in range(num_iters):
        f = 8 * u ** 3 - 4 * (p0 + 2) * u ** 2 - q0 ** 2
        df = 24 * u ** 2 - 8 * (p0 + 2) * u
        step = f / df
        u = u - step
        if np.all(np.abs(step) <= 1e-15 * u):
            break
    p_out, q_out = p.copy(), q.copy()
    p_out[outside] = p0 - 2 * (u - 1)
    q_out[outside] = q0 / u
    return p_out, q_out


def estimate_opnorm(K, num_iters=300, tol=1e-8):
    """
    Operator norm of K by power iteration on K^T K from a fixed start vector.

    Parameters
    ----------
    K: array, sparse matrix or LinearOperator
        The operator (its adjoint must be available)

    Returns
    -------
    norm: float
        0. for the zero operator
    """
    K = scipy.sparse.linalg.aslinearoperator(K)
    n = K.shape[1]
    if n == 0 or K.shape[0] == 0:
        return 0.
    v = np.random.default_rng(0).standard_normal(n)
    v /= np.linalg.norm(v)
    norm = 0.
    for i in range(num_iters):
        w = K.rmatvec(K.matvec(v))
        w_norm = float(np.linalg.norm(w))
        if w_norm == 0.:
            return 0.
        new_norm = np.sqrt(w_norm)
        v = w / w_norm
        if abs(new_norm - norm) <= tol * new_norm:
            return float(new_norm)
        norm = new_norm
    return float(norm)


class GridProblem:
    """
    Operators of the reconstruction functional in the (rho[0], eta) parametrization.

    Parameters
    ----------
    listmode: Listmode
    model: ForwardModel
    q: float
    beta: float
    """
    def __init__(self, listmode, model, q=1., beta=1.):
        grid = model.grid
        self.model = model
        self.grid = grid
        self.q = float(q)
        self.beta = float(beta)
        self.sqrt_beta = np.sqrt(self.beta)
        self.alpha = model.intensity_rate
        self.n_bins = grid.n_bins
        self.c = grid.geometry.bin_width / grid.h
        self.div, self.avg = grid.get_mask_operators()
        self.num_mask = grid.num_mask
        self.num_faces = self.div.shape[1]
        self.size = self.num_mask + self.n_bins * self.num_faces

        self.event_operator = EventOperator(model, listmode, self.q) if len(listmode) > 0 else None
        if self.event_operator is not None:
            self.weights = self.event_operator.weights
        else:
            self.weights = np.zeros(0)
        self.num_rows = self.weights.size

        N, nf = self.n_bins, self.num_faces
        self.block_shapes = dict(bb=(2, N, nf), log=(self.num_rows, ), pos=(N, self.num_mask))
        self.g = self.rho_adjoint(np.full((N, self.num_mask), self.alpha))

    def __repr__(self):
        return f'GridProblem: {self.size} unknowns {self.num_rows} event rows q={self.q} beta={self.beta}'

    # parametrization
    def split(self, x):
        return x[:self.num_mask], x[self.num_mask:].reshape(self.n_bins, self.num_faces)

    def join(self, rho0, eta):
        return np.concatenate([rho0, np.asarray(eta).ravel()])

    def rho_from(self, x):
        """rho (N, num_mask) obtained by time stepping rho[t + 1] = rho[t] - dT / h div(eta[t])."""
        rho0, eta = self.split(x)
        rho = np.empty((self.n_bins, self.num_mask))
        rho[0] = rho0
        if self.n_bins > 1:
            outflow = self.c * (self.div @ eta[:-1].T).T
            rho[1:] = rho0[None, :] - np.cumsum(outflow, axis=0)
        return rho

    def rho_adjoint(self, G):
        """Adjoint of rho_from."""
        G = np.asarray(G, dtype='float64')
        eta = np.zeros((self.n_bins, self.num_faces))
        if self.n_bins > 1:
            tail = np.cumsum(G[::-1], axis=0)[::-1][1:]
            eta[:-1] = -self.c * (self.div.T @ tail.T).T
        return self.join(np.sum(G, axis=0), eta)

    # block operators (unscaled)
    def apply_block(self, name, x, rho=None):
        if rho is None:
            rho = self.rho_from(x)
        if name == 'bb':
            _, eta = self.split(x)
            return np.stack([(self.avg @ rho.T).T, self.sqrt_beta * eta])
        elif name == 'log':
            return self.event_operator.matvec(rho)
        elif name == 'pos':
            return rho

    def adjoint_block(self, name, y):
        if name == 'bb':
            x = self.rho_adjoint((self.avg.T @ y[0].T).T)
            x[self.num_mask:] += self.sqrt_beta * y[1].ravel()
            return x
        elif name == 'log':
            return self.rho_adjoint(self.event_operator.rmatvec(y))
        elif name == 'pos':
            return self.rho_adjoint(y)

    def active_blocks(self):
        blocks = ['bb', 'pos']
        if self.num_rows > 0:
            blocks.insert(1, 'log')
        return blocks

    def block_operator(self, name):
        shape = self.block_shapes[name]
        return scipy.sparse.linalg.LinearOperator(
            (int(np.prod(shape)), self.size), dtype='float64',
            matvec=lambda v: self.apply_block(name, np.ravel(v)).ravel(),
            rmatvec=lambda v: self.adjoint_block(name, np.reshape(v, shape)))

    def monitored_value(self, Kx):
        """
        Objective parts read from the unscaled block images of the current iterate. Faces
        with a nonpositive mean are skipped, so this is for monitoring only.
        """
        rho = Kx['pos']
        fidelity_mass = self.alpha * float(np.sum(rho))
        neg_log = 0.
        if self.num_rows > 0:
            neg_log = -float(np.sum(self.weights * np.log(np.maximum(Kx['log'], _tiny))))
        a, b = Kx['bb']
        positive = a > 0
        bb = float(np.sum(b[positive] ** 2 / a[positive]))
        return fidelity_mass, neg_log, bb


class SolverState:
    """
    Iterate of the primal dual loop.

    Parameters
    ----------
    x: np.array
        Primal (rho[0], eta)
    y: dict
        One dual array per block, in the rescaled block coordinates
    tau, sigma: float
        Primal and dual steps, tau * sigma * ||K||^2 <= 1 for the rescaled operator K
    """
    def __init__(self, x, y, tau, sigma):
        self.x = x
        self.y = y
        self.tau = float(tau)
        self.sigma = float(sigma)
        self.iteration = 0
        self.history = []

    def __repr__(self):
        return f'SolverState: iteration {self.iteration} tau={self.tau:.3g} sigma={self.sigma:.3g}'


def _dual_prox(name, y, sigma, scale, weights):
    if name == 'bb':
        # conjugate of the perspective: indicator of the parabolic set, rescaled
        p, q = project_parabola(scale * y[0], scale * y[1])
        return np.stack([p, q]) / scale
    elif name == 'log':
        # Moreau identity with the prox of -w log, the constant of the rescaling drops out
        return -prox_neglog(-y, sigma, weights)
    elif name == 'pos':
        return np.minimum(y, 0.)


def _repair_weight(rho, total_mass):
    uniform = total_mass / rho.size
    neg = rho < 0
    if not np.any(neg):
        return 0., uniform
    return float(np.max(-rho[neg] / (uniform - rho[neg]))), uniform


def _repair_positivity(rho, eta, total_mass):
    """
    Mix with the static uniform measure, the smallest amount making rho nonnegative.
    The mixture satisfies the continuity equation whenever (rho, eta) does.
    """
    eps, uniform = _repair_weight(rho, total_mass)
    if eps == 0.:
        return rho, eta, 0.
    rho = np.maximum((1 - eps) * rho + eps * uniform, 0.)
    return rho, (1 - eps) * eta, eps


def _feasible_parameter(problem, x, fallback_mass):
    """The parameter of the positivity repaired measure (see _repair_positivity)."""
    rho = problem.rho_from(x)
    total = float(np.sum(rho))
    eps, uniform = _repair_weight(rho, total if total > 0 else fallback_mass)
    if eps == 0.:
        return x
    rho0, eta = problem.split(x)
    return problem.join((1 - eps) * rho0 + eps * uniform, (1 - eps) * eta)


def duality_gap(problem, scales, x, y, KTy):
    """
    Duality gap estimate at a nonnegative primal x and a dual y of the rescaled blocks.

    The gap is the sum of the Fenchel-Young gaps F(Kx) + F*(y) - <Kx, y> of every block (each
    one is nonnegative) plus the stationarity term ||x|| ||g + K^T y||, the dual function
    being restricted to the ball of radius ||x|| around x.

    Parameters
    ----------
    problem: GridProblem
    scales: dict
        Block scales
    x: np.array
        Primal parameter with rho_from(x) >= 0 (up to rounding)
    y: dict
        Dual arrays, in the rescaled block coordinates
    KTy: np.array
        sum of scales[n] * K_n^T y[n]

    Returns
    -------
    gap: float
        Absolute gap (inf when x is outside the domain of the functional)
    primal: float
        Value of the functional at x
    """
    rho = np.maximum(problem.rho_from(x), 0.)
    _, eta = problem.split(x)
    a = (problem.avg @ rho.T).T
    b = problem.sqrt_beta * eta
    positive = a > 0
    if np.any(~positive & (b != 0)):
        return np.inf, np.inf
    bb = float(np.sum(b[positive] ** 2 / a[positive]))
    p, r = scales['bb'] * y['bb']
    fenchel = bb - float(np.sum(a * p + b * r))

    neg_log = 0.
    if problem.num_rows > 0:
        w = problem.weights
        z = problem.event_operator.matvec(rho)
        if np.any(z <= 0):
            return np.inf, np.inf
        neg_log = -float(np.sum(w * np.log(z)))
        u = scales['log'] * z * (-y['log']) / w
        fenchel += float(np.sum(w * (u - 1 - np.log(u))))

    fenchel -= scales['pos'] * float(np.sum(rho * y['pos']))
    fenchel += float(np.linalg.norm(x) * np.linalg.norm(problem.g + KTy))
    primal = problem.alpha * float(np.sum(rho)) + neg_log + bb
    return fenchel, primal


def reconstruct_grid(listmode, model, q=1., beta=1., max_iters=5000, tol=1e-4, adaptive=True,
                     divergence_window=100, log_every=10, progress_bar=False, verbose=False):
    """
    Minimize the reconstruction functional over grid measures.

    Parameters
    ----------
    listmode: Listmode
        The events (continuous events are binned when the model is discrete)
    model: ForwardModel
        The forward model and its grid
    q: float
        Debiasing parameter
    beta: float
        Transport weight
    max_iters: int
        Maximum number of primal dual iterations
    tol: float
        Stop when the relative duality gap estimate (see duality_gap) falls below tol
    adaptive: bool
        Balance the primal and dual steps along the run (tau * sigma stays fixed)
    divergence_window: int
        Abort when the objective increased this many consecutive iterations
    log_every: int
        Record the objective parts every log_every iterations
    progress_bar: bool
    verbose: bool

    Returns
    -------
    grid_measure: GridMeasure
    value: ObjectiveValue
    diagnostics: dict
    """
    if not (q > 0 and beta > 0):
        raise ValueError(f'q and beta must be positive, got q={q} beta={beta}')
    if not (model.p_s > 0 and model.p_d > 0):
        raise ValueError(f'p_s and p_d must be positive, got p_s={model.p_s} p_d={model.p_d}')
    if not listmode.geometry.is_same(model.geometry):
        raise ValueError('listmode and model geometries differ')
    grid = model.grid
    num_events = len(listmode)
    if num_events == 0:
        gm = GridMeasure.zeros(grid)
        value = evaluate_J(gm, listmode, model, q=q, beta=beta)
        diagnostics = dict(iterations=0, converged=True, gap=0., residual=0., residual_max=0., residual_l1=0.,
                           repair_fraction=0., history=[])
        return gm, value, diagnostics

    problem = GridProblem(listmode, model, q=q, beta=beta)
    blocks = problem.active_blocks()

    # rescale every block to unit norm
    scales = {}
    for name in blocks:
        norm = estimate_opnorm(problem.block_operator(name))
        scales[name] = 1. / norm if norm > 0 else 1.
    scaled = scipy.sparse.linalg.LinearOperator(
        (sum(int(np.prod(problem.block_shapes[n])) for n in blocks), problem.size), dtype='float64',
        matvec=lambda v: np.concatenate([scales[n] * problem.apply_block(n, v).ravel() for n in blocks]),
        rmatvec=lambda v: _scaled_adjoint(problem, blocks, scales, v))
    opnorm = estimate_opnorm(scaled) * 1.01
    tau = sigma = 1. / opnorm

    def apply_all(x):
        rho = problem.rho_from(x)
        return {n: problem.apply_block(n, x, rho=rho) for n in blocks}

    def adjoint_all(y):
        return sum(scales[n] * problem.adjoint_block(n, y[n]) for n in blocks)

    # strictly feasible start: static uniform with the maximum likelihood mass scale
    init = uniform_measure(model, num_events)
    rho_mask, eta_mask = measure_to_mask_arrays(init)
    x = problem.join(rho_mask[0], eta_mask)
    Kx = apply_all(x)
    y = {n: np.zeros(problem.block_shapes[n]) for n in blocks}
    if 'log' in blocks:
        z = scales['log'] * Kx['log']
        y['log'] = -problem.weights / np.where(z > 0, z, 1.)
    KTy = adjoint_all(y)
    state = SolverState(x, y, tau, sigma)

    g_norm = float(np.sum(np.abs(problem.g)))
    adapt_rate, adapt_decay, adapt_ratio = 0.5, 0.95, 1.5
    init_mass = init.total_mass()
    increases = 0
    previous = np.inf
    converged = False
    gap = residual = np.inf

    def relative_gap(x, y, KTy):
        absolute, primal = duality_gap(problem, scales, _feasible_parameter(problem, x, init_mass), y, KTy)
        if not np.isfinite(absolute):
            return np.inf
        return absolute / max(abs(primal), _tiny)

    iterations = range(max_iters)
    if progress_bar:
        iterations = tqdm(iterations, ascii=True, desc='grid solver')
    for it in iterations:
        x, y, tau, sigma = state.x, state.y, state.tau, state.sigma
        x_new = x - tau * (KTy + problem.g)
        Kx_new = apply_all(x_new)
        y_new = {}
        for n in blocks:
            relaxed = scales[n] * (2 * Kx_new[n] - Kx[n])
            y_new[n] = _dual_prox(n, y[n] + sigma * relaxed, sigma, scales[n], problem.weights)
        KTy_new = adjoint_all(y_new)
        if not (np.all(np.isfinite(x_new)) and np.all(np.isfinite(KTy_new))):
            raise DynpetSolverError(f'non finite iterate at iteration {it}')

        primal_res = float(np.sum(np.abs((x - x_new) / tau - (KTy - KTy_new))))
        dual_res = sum(float(np.sum(np.abs((y[n] - y_new[n]) / sigma - scales[n] * (Kx[n] - Kx_new[n]))))
                       for n in blocks)
        image_norm = sum(float(np.sum(np.abs(scales[n] * Kx_new[n]))) for n in blocks)
        residual = max(primal_res / max(g_norm, float(np.sum(np.abs(KTy_new))), _tiny),
                       dual_res / max(image_norm, _tiny))

        state.x, state.y = x_new, y_new
        state.iteration = it + 1
        Kx, KTy = Kx_new, KTy_new

        logged = it % log_every == 0
        if logged or residual < tol:
            gap = relative_gap(x_new, y_new, KTy_new)

        parts = problem.monitored_value(Kx)
        value = sum(parts)
        if logged:
            state.history.append(dict(iteration=it, fidelity_mass=parts[0], neg_log=parts[1], bb=parts[2],
                                      gap=gap, residual=residual, tau=tau, sigma=sigma))
        # negative iterates are skipped, their monitored value is not the functional
        if np.min(Kx['pos']) >= 0:
            if value > previous + 1e-12 * abs(previous):
                increases += 1
                if increases >= divergence_window:
                    raise DynpetSolverError(f'the objective increased during {divergence_window} consecutive '
                                            f'iterations (iteration {it}, value {value:.6g})')
            else:
                increases = 0
            previous = value

        if gap < tol and it > 0:
            converged = True
            break

        if adaptive:
            if primal_res > adapt_ratio * dual_res:
                state.tau, state.sigma = tau / (1 - adapt_rate), sigma * (1 - adapt_rate)
                adapt_rate *= adapt_decay
            elif dual_res > adapt_ratio * primal_res:
                state.tau, state.sigma = tau * (1 - adapt_rate), sigma / (1 - adapt_rate)
                adapt_rate *= adapt_decay

    if not converged and state.iteration > 0:
        gap = relative_gap(state.x, state.y, KTy)
    rho = problem.rho_from(state.x)
    _, eta = problem.split(state.x)
    total = float(np.sum(rho))
    rho, eta, repair = _repair_positivity(rho, eta, total if total > 0 else init_mass)
    gm = mask_arrays_to_measure(grid, rho, eta)
    value = evaluate_J(gm, listmode, model, q=q, beta=beta, event_operator=problem.event_operator)
    residual_max, residual_l1 = check_continuity(gm)
    if verbose:
        print(f'grid solver: {state.iteration} iterations gap={gap:.3g} converged={converged} {value}')

    state.history.append(dict(iteration=state.iteration, fidelity_mass=value.fidelity_mass, neg_log=value.neg_log,
                              bb=value.bb, gap=gap, residual=residual, tau=state.tau, sigma=state.sigma))
    diagnostics = dict(iterations=state.iteration, converged=converged, gap=gap, residual=residual, opnorm=opnorm,
                       block_scales=scales, residual_max=residual_max, residual_l1=residual_l1,
                       repair_fraction=repair, history=state.history)
    return gm, value, diagnostics


def _scaled_adjoint(problem, blocks, scales, v):
    out = np.zeros(problem.size)
    start = 0
    for n in blocks:
        shape = problem.block_shapes[n]
        size = int(np.prod(shape))
        out += scales[n] * problem.adjoint_block(n, v[start:start + size].reshape(shape))
        start += size
    return out


class GridSolver(BaseSolver):
    """
    Primal dual solver on the voxel grid of the forward model.
    """
    solver_name = 'grid'

    _default_params = {
        'q': 1.,
        'beta': 1.,
        'max_iters': 5000,
        'tol': 1e-4,
        'adaptive': True,
        'divergence_window': 100,
        'log_every': 10,
        'progress_bar': False,
    }

    _params_description = {
        'q': 'Debiasing parameter (1 is the unbiased functional)',
        'beta': 'Weight of the transport regularization',
        'max_iters': 'Maximum number of primal dual iterations',
        'tol': 'Stopping threshold on the relative duality gap estimate',
        'adaptive': 'Balance the primal and dual step sizes during the run',
        'divergence_window': 'Abort after this many consecutive objective increases',
        'log_every': 'Objective history sampling period (iterations)',
        'progress_bar': 'Display a progress bar',
    }

    solver_description = """Minimizes the transport regularized likelihood over grid measures with a
    rescaled Chambolle-Pock iteration. The continuity equation holds exactly along the iterates."""

    @classmethod
    def _check_params(cls, params):
        if not (params['q'] > 0 and params['beta'] > 0):
            raise ValueError('q and beta must be positive')
        if not (params['tol'] > 0 and params['max_iters'] >= 1):
            raise ValueError('tol must be positive and max_iters >= 1')
        return params

    @classmethod
    def _run(cls, listmode, model, params, verbose):
        gm, value, diagnostics = reconstruct_grid(listmode, model, verbose=verbose, **params)
        return Reconstruction(cls.solver_name, gm, value, diagnostics)
