import pytest
import numpy as np
import scipy.optimize

from dynpet.forward import ForwardModel
from dynpet.listmode import GroundTruth, sample_poisson_listmode, Listmode
from dynpet.objective import evaluate_J, infimum_bound, check_continuity
from dynpet.core import mask_arrays_to_measure
from dynpet.solvers import (GridProblem, reconstruct_grid, duality_gap, prox_neglog, project_parabola, estimate_opnorm,
                            DynpetSolverError)
from dynpet.core.tests.testing_tools import generate_geometry, generate_discrete_events


def _model(geom, nx=9, **kwargs):
    params = dict(kernel=0.02, p_s=0.1, p_d=0.5, mode='discrete')
    params.update(kwargs)
    return ForwardModel(geom, nx, **params)


def _static_listmode(geom, position=(0., 0.), num_events=200, seed=0):
    knots = np.repeat(np.array(position, dtype='float64')[None, None, :], geom.n_bins, axis=1)
    gt = GroundTruth(geom, [num_events / 0.6 / geom.T], knots)
    return sample_poisson_listmode(gt, 0.1, 0.5, kernel=0.02, mode='discrete', seed=seed)


def test_prox_neglog():
    assert np.isclose(prox_neglog(0., 1., 1.), 1.)
    assert np.isclose(prox_neglog(3., 1., 1.), (3 + np.sqrt(13)) / 2)
    assert np.isclose(prox_neglog(5., 1e-12, 1.), 5.)

    # no cancellation for large negative arguments
    out = prox_neglog(-1e6, 1., 1.)
    assert out > 0
    assert np.isclose(out * (out + 1e6), 1.)

    for x, tau, w in [(0.3, 0.5, 2.), (-2., 0.1, 1.), (4., 3., 0.5)]:
        res = scipy.optimize.minimize_scalar(lambda s: (s - x) ** 2 / (2 * tau) - w * np.log(s),
                                             bounds=(1e-12, 100.), method='bounded',
                                             options=dict(xatol=1e-12))
        assert np.isclose(prox_neglog(x, tau, w), res.x, atol=1e-6)


def test_project_parabola():
    # inside points are not moved
    p, q = project_parabola(np.array([-1., -3.]), np.array([1., -2.]))
    assert np.allclose(p, [-1., -3.]) and np.allclose(q, [1., -2.])

    p, q = project_parabola(np.array([2.]), np.array([0.]))
    assert np.allclose(p, 0.) and np.allclose(q, 0.)

    rng = np.random.default_rng(0)
    p0 = rng.uniform(-2, 3, size=20)
    q0 = rng.uniform(-4, 4, size=20)
    p, q = project_parabola(p0, q0)
    outside = p0 + q0 ** 2 / 4 > 0
    assert np.allclose((p + q ** 2 / 4)[outside], 0., atol=1e-10)
    assert np.all(p + q ** 2 / 4 <= 1e-10)

    # closest point of the boundary {(-s^2 / 4, s)}
    s = np.linspace(-10, 10, 200001)
    for i in np.flatnonzero(outside):
        brute = np.min((-s ** 2 / 4 - p0[i]) ** 2 + (s - q0[i]) ** 2)
        dist = (p[i] - p0[i]) ** 2 + (q[i] - q0[i]) ** 2
        assert dist <= brute + 1e-6


def test_estimate_opnorm():
    assert np.isclose(estimate_opnorm(np.eye(5)), 1.)
    assert np.isclose(estimate_opnorm(np.diag([3., 1.])), 3., rtol=1e-6)
    assert estimate_opnorm(np.zeros((3, 4))) == 0.

    rng = np.random.default_rng(1)
    A = rng.standard_normal((12, 7))
    assert np.isclose(estimate_opnorm(A), np.linalg.norm(A, 2), rtol=1e-4)


def test_grid_problem_operators():
    geom = generate_geometry()
    model = _model(geom, nx=7)
    listmode = generate_discrete_events(geom, 30, seed=2)
    problem = GridProblem(listmode, model, q=0.8, beta=0.5)
    assert problem.active_blocks() == ['bb', 'log', 'pos']

    rng = np.random.default_rng(3)
    x = rng.standard_normal(problem.size)
    for name in problem.active_blocks():
        y = rng.standard_normal(problem.block_shapes[name])
        lhs = np.sum(problem.apply_block(name, x) * y)
        rhs = np.dot(x, problem.adjoint_block(name, y))
        assert np.isclose(lhs, rhs)

    # dense oracle of the event block
    K = problem.block_operator('log')
    dense = np.stack([K.matvec(e) for e in np.eye(problem.size)], axis=1)
    assert np.isclose(estimate_opnorm(K), np.linalg.norm(dense, 2), rtol=1e-3)

    # any parameter is conservative
    rho0 = rng.uniform(1., 2., size=problem.num_mask)
    eta = 0.01 * rng.standard_normal((problem.n_bins, problem.num_faces))
    x = problem.join(rho0, eta)
    gm = mask_arrays_to_measure(model.grid, problem.rho_from(x), eta)
    res_max, res_l1 = check_continuity(gm)
    assert res_l1 <= 1e-12 * gm.total_mass()

    empty = GridProblem(Listmode(None, geom, mode='discrete'), model)
    assert empty.active_blocks() == ['bb', 'pos']


def test_reconstruct_grid_no_event():
    geom = generate_geometry()
    model = _model(geom)
    gm, value, diagnostics = reconstruct_grid(Listmode(None, geom, mode='discrete'), model)
    assert gm.total_mass() == 0.
    assert value.total == 0.
    assert diagnostics['iterations'] == 0


def test_reconstruct_grid_errors():
    geom = generate_geometry()
    listmode = generate_discrete_events(geom, 10)
    with pytest.raises(ValueError):
        reconstruct_grid(listmode, _model(geom), q=0.)
    with pytest.raises(ValueError):
        reconstruct_grid(listmode, _model(geom), beta=-1.)
    with pytest.raises(ValueError):
        reconstruct_grid(listmode, _model(generate_geometry(T=2.)))
    # the listmode model needs scatter and detection
    with pytest.raises(ValueError):
        reconstruct_grid(listmode, _model(geom, p_s=0.))
    with pytest.raises(ValueError):
        reconstruct_grid(listmode, _model(geom, p_d=0.))


def test_reconstruct_grid_static_particle():
    geom = generate_geometry()
    model = _model(geom)
    listmode = _static_listmode(geom)
    assert 120 < len(listmode) < 280

    gm, value, diagnostics = reconstruct_grid(listmode, model, beta=0.01, max_iters=5000)
    mass = gm.total_mass()
    assert np.all(gm.rho >= 0)
    assert diagnostics['residual_l1'] <= 1e-8 * mass
    assert value.feasible
    assert value.total <= infimum_bound(listmode, model, beta=0.01).total

    # every event is explained by some mass: at most |E| / alpha
    assert mass <= 1.05 * len(listmode) / model.intensity_rate

    grid = model.grid
    dist = np.linalg.norm(grid.centers, axis=1)
    near = np.sum(gm.rho.reshape(geom.n_bins, -1)[:, dist <= 2 * grid.h + 1e-9])
    assert near >= 0.8 * mass

    history = diagnostics['history']
    assert len(history) > 1
    assert history[-1]['iteration'] == diagnostics['iterations']


def test_duality_gap():
    geom = generate_geometry()
    model = _model(geom, nx=7)
    listmode = _static_listmode(geom, num_events=40, seed=8)
    problem = GridProblem(listmode, model, q=1., beta=0.5)
    blocks = problem.active_blocks()
    scales = {n: 1. for n in blocks}

    rng = np.random.default_rng(9)
    rho0 = rng.uniform(1., 2., size=problem.num_mask)
    eta = 1e-3 * rng.standard_normal((problem.n_bins, problem.num_faces))
    x = problem.join(rho0, eta)
    rho = problem.rho_from(x)
    assert np.all(rho > 0)

    # the primal value is the functional of the measure
    gm = mask_arrays_to_measure(model.grid, rho, eta)
    value = evaluate_J(gm, listmode, model, q=1., beta=0.5, event_operator=problem.event_operator)
    for _ in range(5):
        # random points of the dual domain
        r = rng.standard_normal((problem.n_bins, problem.num_faces))
        p = -r ** 2 / 4 - rng.uniform(0., 1., size=r.shape)
        y = dict(bb=np.stack([p, r]), log=-rng.uniform(0.1, 2., size=problem.num_rows),
                 pos=-rng.uniform(0., 1., size=problem.block_shapes['pos']))
        KTy = sum(problem.adjoint_block(n, y[n]) for n in blocks)
        gap, primal = duality_gap(problem, scales, x, y, KTy)
        assert gap >= 0
        assert np.isclose(primal, value.total, rtol=1e-10)

    # no mass under a nonzero flux is outside the domain
    gap, primal = duality_gap(problem, scales, problem.join(np.zeros(problem.num_mask), eta), y, KTy)
    assert gap == np.inf


def test_reconstruct_grid_gap_decreases():
    geom = generate_geometry()
    model = _model(geom)
    listmode = _static_listmode(geom)
    gm, value, diagnostics = reconstruct_grid(listmode, model, beta=0.01, max_iters=5000, tol=1e-2)
    gaps = np.array([h['gap'] for h in diagnostics['history']])
    assert np.all(gaps[np.isfinite(gaps)] >= 0)
    assert diagnostics['converged']
    assert 0 <= diagnostics['gap'] < 1e-2
    assert diagnostics['gap'] < gaps[0]
    # the residual is reported on its own
    assert np.isfinite(diagnostics['residual'])


def test_reconstruct_grid_divergence(monkeypatch):
    geom = generate_geometry()
    model = _model(geom, nx=7)
    listmode = _static_listmode(geom, num_events=40, seed=10)
    values = iter(np.arange(1., 1e6))

    # a steadily rising objective aborts the run, whatever the residual does
    monkeypatch.setattr(GridProblem, 'monitored_value', lambda self, Kx: (next(values), 0., 0.))
    with pytest.raises(DynpetSolverError):
        reconstruct_grid(listmode, model, max_iters=1000, tol=1e-14, divergence_window=3)


def test_reconstruct_grid_order_invariance():
    geom = generate_geometry()
    model = _model(geom, nx=7)
    listmode = _static_listmode(geom, position=(0.2, -0.1), num_events=60, seed=4)
    rng = np.random.default_rng(5)
    shuffled = Listmode(listmode.events[rng.permutation(len(listmode))], geom, mode='discrete')
    gm1, value1, _ = reconstruct_grid(listmode, model, max_iters=300)
    gm2, value2, _ = reconstruct_grid(shuffled, model, max_iters=300)
    assert np.array_equal(gm1.rho, gm2.rho)
    assert value1.total == value2.total


def test_reconstruct_grid_q_monotone():
    geom = generate_geometry()
    model = _model(geom, nx=7)
    listmode = _static_listmode(geom, position=(0.1, 0.2), num_events=80, seed=6)
    values = []
    for q in (0.5, 1., 2.):
        _, value, _ = reconstruct_grid(listmode, model, q=q, beta=0.1, max_iters=4000)
        values.append(value.total)
    for v0, v1 in zip(values[:-1], values[1:]):
        assert v1 <= v0 + 1e-2 * abs(v0)


def test_positivity_repair_keeps_continuity():
    from dynpet.solvers.gridsolver import _repair_positivity

    geom = generate_geometry()
    model = _model(geom, nx=7)
    problem = GridProblem(Listmode(None, geom, mode='discrete'), model)
    rng = np.random.default_rng(7)
    rho0 = rng.uniform(0., 1., size=problem.num_mask)
    eta = 0.5 * rng.standard_normal((problem.n_bins, problem.num_faces))
    rho = problem.rho_from(problem.join(rho0, eta))
    assert np.any(rho < 0)
    rho, eta, eps = _repair_positivity(rho, eta, float(np.sum(rho)))
    assert 0 < eps < 1
    assert np.all(rho >= 0)
    gm = mask_arrays_to_measure(model.grid, rho, eta)
    res_max, res_l1 = check_continuity(gm)
    assert res_l1 <= 1e-10 * gm.total_mass()


if __name__ == '__main__':
    test_prox_neglog()
    test_project_parabola()
    test_estimate_opnorm()
    test_grid_problem_operators()
    test_reconstruct_grid_no_event()
    test_reconstruct_grid_static_particle()
    test_duality_gap()
    test_reconstruct_grid_gap_decreases()
    test_reconstruct_grid_order_invariance()
    test_reconstruct_grid_q_monotone()
    test_positivity_repair_keeps_continuity()
