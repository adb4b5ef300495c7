import itertools

import pytest
import numpy as np

from dynpet.core import BaseDynpetObject
from dynpet.forward import ForwardModel
from dynpet.listmode import GroundTruth, sample_poisson_listmode, Listmode, continuous_dtype
from dynpet.objective import ParticleObjective, evaluate_particle_J
from dynpet.solvers import ParticleSet, shortest_path, insert_trajectory, refine, reconstruct_particles
from dynpet.core.tests.testing_tools import generate_geometry


def _model(geom, nx=9, **kwargs):
    params = dict(kernel=0.025, p_s=0.1, p_d=0.5, mode='continuous')
    params.update(kwargs)
    return ForwardModel(geom, nx, **params)


def _static_truth(geom, positions, masses):
    positions = np.asarray(positions, dtype='float64')
    knots = np.repeat(positions[:, None, :], geom.n_bins, axis=1)
    return GroundTruth(geom, masses, knots)


def _one_event(geom, t, a, b):
    events = np.zeros(1, dtype=continuous_dtype(geom.dim))
    events['t'] = t
    events['a'] = a
    events['b'] = b
    return Listmode(events, geom, mode='continuous')


def test_particle_set(tmp_path):
    geom = generate_geometry()
    particles = ParticleSet.empty(geom)
    assert particles.get_num_particles() == 0
    particles = particles.add(2., np.zeros((geom.n_bins, 2)))
    particles = particles.add(1e-9, np.full((geom.n_bins, 2), 0.1))
    assert particles.get_num_particles() == 2

    pruned = particles.prune(1e-6)
    assert pruned.get_num_particles() == 1
    assert pruned.masses[0] == 2.

    pruned.dump_to_json(tmp_path / 'particles.json')
    loaded = BaseDynpetObject.load_from_json(tmp_path / 'particles.json')
    assert isinstance(loaded, ParticleSet)
    assert np.array_equal(loaded.masses, pruned.masses)
    assert np.array_equal(loaded.knots, pruned.knots)

    with pytest.raises(ValueError):
        ParticleSet(geom, [-1.], np.zeros((1, geom.n_bins, 2)))


def test_shortest_path():
    rng = np.random.default_rng(0)
    N, num = 3, 4
    cost = rng.uniform(-1, 1, size=(N, num))
    positions = rng.uniform(-0.5, 0.5, size=(num, 2))
    edge_weights = np.array([2., 3.])

    def path_value(path):
        v = sum(cost[t, u] for t, u in enumerate(path))
        v += sum(edge_weights[s] * np.sum((positions[path[s + 1]] - positions[path[s]]) ** 2) for s in range(N - 1))
        return v

    brute = min(itertools.product(range(num), repeat=N), key=path_value)
    for n_jobs, chunk_size in [(1, 256), (2, 1)]:
        path, value = shortest_path(cost, positions, edge_weights, n_jobs=n_jobs, chunk_size=chunk_size)
        assert tuple(path) == brute
        assert np.isclose(value, path_value(brute))

    # removed nodes are never visited
    cost[1, brute[1]] = np.inf
    path, value = shortest_path(cost, positions, edge_weights)
    assert path[1] != brute[1]
    assert np.isfinite(value)

    # one time bin
    path, value = shortest_path(cost[:1], positions, np.zeros(0))
    assert path.shape == (1, )
    assert path[0] == np.argmin(cost[0])


def test_insert_without_events():
    geom = generate_geometry()
    model = _model(geom)
    objective = ParticleObjective(Listmode(None, geom, mode='continuous'), model)
    positions = model.grid.centers[model.grid.mask_indices]
    knots, mass, linearized = insert_trajectory(ParticleSet.empty(geom), objective, positions)
    assert knots is None
    assert mass == 0.
    assert linearized > 0


def test_insert_single_event():
    geom = generate_geometry()
    model = _model(geom)
    # horizontal line of response y = 0.6 during the third time bin
    listmode = _one_event(geom, 0.6, [-0.8, 0.6], [0.8, 0.6])
    objective = ParticleObjective(listmode, model, beta=1e-8)
    grid = model.grid
    positions = grid.centers[grid.mask_indices]
    knots, mass, linearized = insert_trajectory(ParticleSet.empty(geom), objective, positions)
    assert knots is not None
    assert linearized < 0
    assert mass > 0
    assert knots.shape == (geom.n_bins, 2)
    assert abs(knots[2, 1] - 0.6) <= grid.h
    assert abs(knots[2, 0]) <= 0.6


def test_insert_static_with_large_beta():
    geom = generate_geometry()
    model = _model(geom)
    gt = _static_truth(geom, [[0.3, -0.2]], [150.])
    listmode = sample_poisson_listmode(gt, 0.1, 0.5, kernel=0.025, seed=1)
    objective = ParticleObjective(listmode, model, beta=1e9)
    positions = model.grid.centers[model.grid.mask_indices]
    knots, mass, linearized = insert_trajectory(ParticleSet.empty(geom), objective, positions)
    assert knots is not None
    assert np.all(knots == knots[0])
    assert np.linalg.norm(knots[0] - [0.3, -0.2]) <= 2 * model.grid.h


def test_dp_radius():
    geom = generate_geometry()
    model = _model(geom)
    listmode = _one_event(geom, 0.6, [-0.8, 0.6], [0.8, 0.6])
    objective = ParticleObjective(listmode, model, beta=1e-8)
    grid = model.grid
    positions = grid.centers[grid.mask_indices]
    knots, mass, _ = insert_trajectory(ParticleSet.empty(geom), objective, positions, dp_radius=grid.h / 2)
    assert knots is not None
    assert abs(knots[2, 1] - 0.6) <= grid.h / 2


def test_refine_mass_closed_form():
    # one time bin, no scatter and one event through the particle: c* = 1 / mass_coef
    geom = generate_geometry(n_bins=1)
    model = _model(geom, p_s=0., p_d=0.5, kernel=0.05)
    listmode = _one_event(geom, 0.5, [-1., 0.], [1., 0.])
    objective = ParticleObjective(listmode, model)
    particles = ParticleSet(geom, [0.5 / objective.mass_coef], np.zeros((1, 1, 2)))
    start = objective.value(particles).total
    refined, value = refine(particles, objective, num_sweeps=20)
    assert value <= start
    assert np.isclose(refined.masses[0], 1. / objective.mass_coef, rtol=1e-3)
    assert np.allclose(refined.knots, 0., atol=1e-6)


def test_refine_descent():
    geom = generate_geometry()
    model = _model(geom)
    gt = _static_truth(geom, [[0.2, 0.1], [-0.3, -0.3]], [80., 60.])
    listmode = sample_poisson_listmode(gt, 0.1, 0.5, kernel=0.025, seed=2)
    objective = ParticleObjective(listmode, model, beta=0.5)

    rng = np.random.default_rng(3)
    knots = gt.knots + rng.uniform(-0.03, 0.03, size=gt.knots.shape)
    particles = ParticleSet(geom, [50., 50.], knots)
    start = objective.value(particles).total
    assert np.isfinite(start)
    refined, value = refine(particles, objective, num_sweeps=10, max_move=0.05)
    assert value <= start
    assert np.isclose(value, objective.value(refined).total)
    assert np.all(refined.masses >= 0)
    assert refined.check_inside()

    # nothing to refine
    empty = ParticleSet.empty(geom)
    assert refine(empty, objective)[0].get_num_particles() == 0


def test_reconstruct_particles_no_event():
    geom = generate_geometry()
    model = _model(geom)
    particles, value, diagnostics = reconstruct_particles(Listmode(None, geom, mode='continuous'), model)
    assert particles.get_num_particles() == 0
    assert value.total == 0.
    assert diagnostics['insertions'] == 0


def test_reconstruct_particles_errors():
    geom = generate_geometry()
    model = _model(geom)
    listmode = Listmode(None, geom, mode='continuous')
    with pytest.raises(ValueError):
        reconstruct_particles(listmode, model, q=0.)
    with pytest.raises(ValueError):
        reconstruct_particles(listmode, _model(geom, mode='discrete'))
    with pytest.raises(ValueError):
        reconstruct_particles(listmode, _model(geom, p_s=0.))
    with pytest.raises(ValueError):
        reconstruct_particles(listmode, _model(geom, p_d=0.))


def test_reconstruct_static_particle():
    geom = generate_geometry()
    model = _model(geom, nx=20, p_s=0.01, p_d=0.6)
    truth = np.array([0.2, 0.1])
    gt = _static_truth(geom, [truth], [200.])
    listmode = sample_poisson_listmode(gt, 0.01, 0.6, kernel=0.025, seed=4)
    particles, value, diagnostics = reconstruct_particles(listmode, model, beta=0.01)

    assert value.feasible
    assert 1 <= particles.get_num_particles() <= len(listmode)
    assert diagnostics['stop_reason'] in ('no descent', 'insufficient decrease', 'max insertions')
    heaviest = int(np.argmax(particles.masses))
    assert particles.masses[heaviest] >= 0.5 * particles.total_mass() / geom.T
    mean_position = np.mean(particles.knots[heaviest], axis=0)
    assert np.linalg.norm(mean_position - truth) <= 2 * model.grid.h

    # the functional went down along the insertions
    totals = [h['total'] for h in diagnostics['history']]
    assert np.all(np.diff(totals) < 0)
    assert np.isclose(totals[-1], value.total)
    assert value.total <= evaluate_particle_J(gt, listmode, model, beta=0.01).total


if __name__ == '__main__':
    test_shortest_path()
    test_insert_without_events()
    test_insert_single_event()
    test_insert_static_with_large_beta()
    test_dp_radius()
    test_refine_mass_closed_form()
    test_refine_descent()
    test_reconstruct_particles_no_event()
    test_reconstruct_static_particle()
