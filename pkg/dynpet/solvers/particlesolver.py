"""
Sparse reconstruction with finitely many moving particles.

Each outer iteration inserts the trajectory minimizing the linearized functional (shortest path
through the time layered graph of candidate voxels), line searches its mass, then refines all
masses and knots locally. The loop stops when an insertion no longer decreases the functional.
"""
import numpy as np
import scipy.optimize
from tqdm import tqdm

from ..core import BaseTrajectories, GridSpec, divide_into_chunks, run_chunks
from ..core.trajectories import segment_energy_weights
from ..objective import ParticleObjective
from .basesolver import BaseSolver, Reconstruction


class ParticleSet(BaseTrajectories):
    """
    Reconstructed particles: masses c_i >= 0 (per unit time) and one knot per time bin.

    Parameters
    ----------
    geometry: ScannerGeometry
    masses: array
        Shape (num_particles, )
    knots: array
        Shape (num_particles, N, dim)
    """
    def __init__(self, geometry, masses=(), knots=()):
        BaseTrajectories.__init__(self, geometry, masses, knots)
        if np.any(self.masses < 0):
            raise ValueError('particle masses must be nonnegative')

    def __repr__(self):
        return f'ParticleSet: {self.get_num_particles()} particles mass={self.total_mass():.6g}'

    @classmethod
    def empty(cls, geometry):
        return cls(geometry)

    def copy(self):
        return ParticleSet(self.geometry, self.masses.copy(), self.knots.copy())

    def add(self, mass, knots):
        knots = np.asarray(knots, dtype='float64').reshape(1, self.geometry.n_bins, self.geometry.dim)
        return ParticleSet(self.geometry, np.append(self.masses, mass), np.concatenate([self.knots, knots]))

    def replace(self, masses=None, knots=None):
        masses = self.masses if masses is None else masses
        knots = self.knots if knots is None else knots
        return ParticleSet(self.geometry, masses, knots)

    def prune(self, mass_eps):
        """Drop the particles lighter than mass_eps."""
        keep = self.masses >= mass_eps
        return ParticleSet(self.geometry, self.masses[keep], self.knots[keep])


def _dp_layer_chunk(start, stop, previous, positions, edge_weight):
    # best predecessor of the destinations start:stop, argmin keeps the lowest index on ties
    diff = positions[start:stop, None, :] - positions[None, :, :]
    total = previous[None, :] + edge_weight * np.sum(diff ** 2, axis=2)
    best = np.argmin(total, axis=1)
    return total[np.arange(stop - start), best], best


def shortest_path(cost, positions, edge_weights, n_jobs=1, chunk_size=256):
    """
    Minimize sum_t cost[t, u_t] + sum_s edge_weights[s] |x_{u_{s+1}} - x_{u_s}|^2 over node sequences.

    Parameters
    ----------
    cost: np.array (N, num)
        Node costs, +inf for removed nodes
    positions: np.array (num, dim)
    edge_weights: np.array (N - 1, )
    n_jobs: int
        Jobs for each layer (destinations are split in chunks)

    Returns
    -------
    path: np.array (N, ) int
    value: float
    """
    N, num = cost.shape
    value = cost[0].copy()
    back = np.zeros((max(N - 1, 0), num), dtype='int64')
    chunks = divide_into_chunks(num, chunk_size)
    for s in range(N - 1):
        returns = run_chunks(_dp_layer_chunk, chunks, func_args=(value, positions, edge_weights[s]),
                             n_jobs=n_jobs, job_name='shortest path')
        best = np.concatenate([r[0] for r in returns])
        back[s] = np.concatenate([r[1] for r in returns])
        value = cost[s + 1] + best
    end = int(np.argmin(value))
    path = [end]
    for s in range(N - 2, -1, -1):
        path.append(int(back[s][path[-1]]))
    return np.array(path[::-1], dtype='int64'), float(value[end])


def _reference_density(particles, objective):
    # with no particle the linearization is taken at the static uniform measure of ML mass
    if particles.get_num_particles() == 0:
        return objective.uniform_density(objective.num_events / objective.mass_coef)
    density = objective.densities(particles)
    if np.any(density <= 0):
        fallback = objective.uniform_density(objective.num_events / objective.mass_coef)
        density = np.where(density > 0, density, fallback)
    return density


def insert_trajectory(particles, objective, positions, dp_radius=None, n_jobs=1):
    """
    Conditional gradient insertion step.

    Parameters
    ----------
    particles: ParticleSet
        Current iterate
    objective: ParticleObjective
    positions: np.array (num, dim)
        Candidate knot positions (voxel centers)
    dp_radius: float or None
        If given, in every time bin with events only the candidates within dp_radius of one
        of its lines of response are kept
    n_jobs: int

    Returns
    -------
    knots: np.array (N, dim) or None
        None when the best path does not decrease the linearized functional
    mass: float
        Line searched mass of the new particle
    linearized: float
        Linearized value of the best unit mass path
    """
    geom = objective.geometry
    N = geom.n_bins
    density = _reference_density(particles, objective)
    cost = objective.node_costs(positions, density)

    if dp_radius is not None:
        for t in range(N):
            events = np.flatnonzero(objective.slice_index == t)
            if events.size == 0:
                continue
            dist = np.linalg.norm(objective.perpendicular_offsets(positions, events), axis=2)
            cost[t, np.min(dist, axis=1) > dp_radius] = np.inf

    if N > 1:
        edge_weights = objective.beta * segment_energy_weights(N) / geom.bin_width
    else:
        edge_weights = np.zeros(0)
    path, linearized = shortest_path(cost, positions, edge_weights, n_jobs=n_jobs)
    if not linearized < 0:
        return None, 0., linearized

    knots = positions[path]
    mass = _line_search_mass(particles, objective, knots)
    if not mass > 0:
        return None, 0., linearized
    return knots, mass, linearized


def _line_search_mass(particles, objective, knots):
    """
    Minimize mu -> J(particles + mu * path). The derivative is increasing in mu and positive
    beyond sum(w) / (mass_coef + beta * kinetic).
    """
    path = ParticleSet(objective.geometry, [1.], knots[None])
    kern = objective.kernels(path)[0]
    slope = objective.mass_coef + objective.beta * float(path.kinetic_energy()[0])
    current = objective.densities(particles)
    w = objective.weights

    def derivative(mu):
        return slope - float(np.sum(w * kern / (current + mu * kern)))

    upper = float(np.sum(w)) / slope
    lower = 1e-12 * upper
    if derivative(lower) >= 0:
        return 0.
    if derivative(upper) <= 0:
        return upper
    return scipy.optimize.brentq(derivative, lower, upper, xtol=1e-14 * upper, rtol=1e-12)


def _update_masses(particles, objective, value):
    """One sweep of coordinate wise Newton steps on the masses, with backtracking and c >= 0."""
    masses = particles.masses.copy()
    kernels = objective.kernels(particles)
    density = masses @ kernels
    kinetic = particles.kinetic_energy()
    w = objective.weights
    for i in range(masses.size):
        k = kernels[i]
        slope = objective.mass_coef + objective.beta * kinetic[i]
        ratio = w * k / density
        grad = slope - float(np.sum(ratio))
        hess = float(np.sum(ratio * k / density))
        if hess > 0:
            delta = max(masses[i] - grad / hess, 0.) - masses[i]
        elif grad > 0:
            delta = -masses[i]
        else:
            continue
        for _ in range(40):
            trial = density + delta * k
            if np.all(trial > 0):
                trial_value = value + delta * slope - float(np.sum(w * (np.log(trial) - np.log(density))))
                if trial_value <= value:
                    masses[i] += delta
                    density = trial
                    value = trial_value
                    break
            delta /= 2
    # recompute to avoid drift of the incremental value
    particles = particles.replace(masses=masses)
    return particles, objective.value(particles).total


def _update_knots(particles, objective, value, max_move, armijo=1e-4):
    """Projected gradient step on the knots with Armijo backtracking."""
    grad = objective.knot_gradient(particles)
    grad_max = float(np.max(np.abs(grad))) if grad.size else 0.
    if grad_max <= 1e-12 * (1. + abs(value)):
        return particles, value
    step = max_move / grad_max
    geom = objective.geometry
    for _ in range(40):
        knots = geom.project_to_D(particles.knots - step * grad)
        trial = particles.replace(knots=knots)
        trial_value = objective.value(trial).total
        if trial_value <= value - armijo * float(np.sum(grad * (particles.knots - knots))):
            return trial, trial_value
        step /= 2
    return particles, value


def refine(particles, objective, num_sweeps=20, rel_tol=1e-9, max_move=0.05):
    """
    Alternate mass updates (coordinate wise Newton) and knot updates (projected gradient)
    until the relative decrease of a sweep falls below rel_tol.

    Parameters
    ----------
    particles: ParticleSet
    objective: ParticleObjective
    num_sweeps: int
    rel_tol: float
    max_move: float
        Largest knot displacement tried by the knot update

    Returns
    -------
    particles: ParticleSet
    value: float
        The functional at the refined particles, never above its value at the input
    """
    value = objective.value(particles).total
    if particles.get_num_particles() == 0:
        return particles, value
    for sweep in range(num_sweeps):
        start = value
        particles, value = _update_masses(particles, objective, value)
        particles, value = _update_knots(particles, objective, value, max_move)
        if not start - value > rel_tol * abs(start):
            break
    return particles, value


def reconstruct_particles(listmode, model, q=1., beta=1., nx=None, max_insertions=None, refine_sweeps=20,
                          rel_tol=1e-6, mass_eps=1e-6, dp_radius=None, n_jobs=1, progress_bar=False,
                          verbose=False):
    """
    Sparse minimization of the reconstruction functional over particle sets.

    Parameters
    ----------
    listmode: Listmode
        Continuous events
    model: ForwardModel
        Continuous forward model
    q: float
        Debiasing parameter
    beta: float
        Transport weight
    nx: int or None
        Voxels per axis of the candidate grid of the insertion step (default: the model grid)
    max_insertions: int or None
        Maximum number of insertions (default and upper bound: the number of events)
    refine_sweeps: int
        Sweeps of the local refinement after each insertion
    rel_tol: float
        Stop when an insertion decreases the functional by less than rel_tol (relative)
    mass_eps: float
        Particles lighter than this are pruned
    dp_radius: float or None
        Candidate pruning radius around the lines of response
    n_jobs: int
    progress_bar: bool
    verbose: bool

    Returns
    -------
    particles: ParticleSet
    value: ObjectiveValue
    diagnostics: dict
    """
    if not (q > 0 and beta > 0):
        raise ValueError(f'q and beta must be positive, got q={q} beta={beta}')
    if not (model.p_s > 0 and model.p_d > 0):
        raise ValueError(f'p_s and p_d must be positive, got p_s={model.p_s} p_d={model.p_d}')
    objective = ParticleObjective(listmode, model, q=q, beta=beta)
    geom = objective.geometry
    particles = ParticleSet.empty(geom)
    num_events = objective.num_events
    if num_events == 0:
        return particles, objective.value(particles), dict(insertions=0, stop_reason='no events', history=[])

    grid = GridSpec(geom, nx if nx is not None else model.nx)
    positions = grid.centers[grid.mask_indices]
    max_move = grid.h / 2
    if max_insertions is None or max_insertions > num_events:
        max_insertions = num_events

    value = np.inf
    history = []
    stop_reason = 'max insertions'
    iterations = range(max_insertions)
    if progress_bar:
        iterations = tqdm(iterations, ascii=True, desc='particle solver')
    for it in iterations:
        knots, mass, linearized = insert_trajectory(particles, objective, positions, dp_radius=dp_radius,
                                                    n_jobs=n_jobs)
        if knots is None:
            stop_reason = 'no descent'
            break
        candidate = particles.add(mass, knots)
        candidate, _ = refine(candidate, objective, num_sweeps=refine_sweeps, max_move=max_move)
        candidate = candidate.prune(mass_eps)
        candidate_value = objective.value(candidate).total
        if not candidate_value < value - rel_tol * abs(value if np.isfinite(value) else 0.):
            stop_reason = 'insufficient decrease'
            break
        particles, value = candidate, candidate_value
        history.append(dict(iteration=it, num_particles=particles.get_num_particles(), total=value,
                            linearized=linearized, inserted_mass=mass))
        if verbose:
            print(f'insertion {it}: {particles.get_num_particles()} particles J={value:.8g}')

    final = objective.value(particles)
    diagnostics = dict(insertions=len(history), stop_reason=stop_reason, history=history)
    return particles, final, diagnostics


class ParticleSolver(BaseSolver):
    """
    Insertion and refinement of moving particles (continuous measurements only).
    """
    solver_name = 'particles'

    _default_params = {
        'q': 1.,
        'beta': 1.,
        'nx': None,
        'max_insertions': None,
        'refine_sweeps': 20,
        'rel_tol': 1e-6,
        'mass_eps': 1e-6,
        'dp_radius': None,
        'n_jobs': 1,
        'progress_bar': False,
    }

    _params_description = {
        'q': 'Debiasing parameter (1 is the unbiased functional)',
        'beta': 'Weight of the transport regularization',
        'nx': 'Voxels per axis of the insertion candidate grid (None: model grid)',
        'max_insertions': 'Maximum number of inserted trajectories (None: number of events)',
        'refine_sweeps': 'Mass and knot refinement sweeps after each insertion',
        'rel_tol': 'Relative decrease below which the insertions stop',
        'mass_eps': 'Particles lighter than this are pruned',
        'dp_radius': 'Keep only candidates within this distance of a line of response (None: all)',
        'n_jobs': 'Number of jobs for the shortest path layers',
        'progress_bar': 'Display a progress bar',
    }

    solver_description = """Conditional gradient insertion of piecewise linear trajectories
    by dynamic programming, followed by local refinement of masses and knots."""

    @classmethod
    def _check_params(cls, params):
        if not (params['q'] > 0 and params['beta'] > 0):
            raise ValueError('q and beta must be positive')
        if params['mass_eps'] < 0:
            raise ValueError('mass_eps must be nonnegative')
        return params

    @classmethod
    def _check_inputs(cls, listmode, model, params):
        super()._check_inputs(listmode, model, params)
        if model.mode != 'continuous' or listmode.mode != 'continuous':
            raise ValueError('the particle solver needs continuous events and a continuous model')

    @classmethod
    def _run(cls, listmode, model, params, verbose):
        particles, value, diagnostics = reconstruct_particles(listmode, model, verbose=verbose, **params)
        return Reconstruction(cls.solver_name, particles, value, diagnostics)
