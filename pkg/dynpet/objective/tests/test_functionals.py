import json

import pytest
import numpy as np

from dynpet.core import GridSpec, GridMeasure
from dynpet.forward import ForwardModel
from dynpet.listmode import GroundTruth, ground_truth_to_grid, Listmode
from dynpet.objective import (ObjectiveValue, benamou_brenier, check_continuity, staggered_divergence, evaluate_J,
                              coercivity_bound, infimum_bound, uniform_measure)
from dynpet.core.tests.testing_tools import (generate_geometry, generate_grid, generate_feasible_pairs,
                                             generate_discrete_events, generate_continuous_events)


def test_benamou_brenier():
    grid = generate_grid(nx=9)
    gm = GridMeasure.uniform(grid, 1.)
    assert benamou_brenier(gm) == 0.

    geom = grid.geometry
    knots = np.zeros((1, geom.n_bins, 2))
    knots[0, :, 0] = 0.3 * (geom.bin_centers() - geom.T / 2)
    gm = ground_truth_to_grid(GroundTruth(geom, [2.], knots), grid)
    assert np.isclose(benamou_brenier(gm), 0.18, rtol=0.05)

    # flux where there is no mass
    gm = GridMeasure.uniform(grid, 1.)
    gm.eta[0][0, 0, 0] = 0.1
    assert benamou_brenier(gm) == np.inf


def test_benamou_brenier_scaling():
    grid = generate_grid(nx=9)
    gm = generate_feasible_pairs(grid, num_pairs=1)[0]
    S = benamou_brenier(gm)
    assert 0 < S < np.inf
    # one homogeneous in (rho, eta)
    assert np.isclose(benamou_brenier(3. * gm), 3. * S)
    # quadratic in eta
    gm2 = GridMeasure(grid, gm.rho, [2 * e for e in gm.eta])
    assert np.isclose(benamou_brenier(gm2), 4. * S)


def test_check_continuity():
    grid = generate_grid(nx=9)
    assert check_continuity(GridMeasure.uniform(grid, 1.)) == (0., 0.)

    gm = generate_feasible_pairs(grid, num_pairs=1, total_mass=2.)[0]
    res_max, res_l1 = check_continuity(gm)
    assert res_l1 <= 1e-12 * 2.
    # nothing flows through the box boundary
    assert np.allclose(np.sum(staggered_divergence(gm).reshape(grid.n_bins, -1), axis=1), 0.)

    rng = np.random.default_rng(0)
    rho = rng.uniform(size=grid.rho_shape())
    eta = [rng.uniform(size=s) for s in grid.eta_shapes()]
    res_max, res_l1 = check_continuity(GridMeasure(grid, rho, eta))
    assert res_max > 0 and res_l1 > res_max

    geom = generate_geometry(n_bins=1)
    assert check_continuity(GridMeasure.uniform(GridSpec(geom, 9), 1.)) == (0., 0.)


def test_objective_value():
    value = ObjectiveValue(1., -3., 0.5)
    assert value.feasible
    assert value.total == -1.5
    assert float(value) == -1.5
    d = value.to_dict()
    json.dumps(d)
    assert d['total'] == -1.5

    value = ObjectiveValue.infeasible()
    assert not value.feasible
    assert value.total == np.inf


def test_evaluate_J_trivial():
    geom = generate_geometry()
    model = ForwardModel(geom, 9, kernel=0.02, p_s=0.1, p_d=0.5)
    empty = Listmode(None, geom, mode='discrete')
    value = evaluate_J(GridMeasure.zeros(model.grid), empty, model, q=1., beta=1.)
    assert value.feasible
    assert value.total == 0.

    listmode = generate_discrete_events(geom, 50, seed=0)
    # zero density at the events
    assert evaluate_J(GridMeasure.zeros(model.grid), listmode, model).total == np.inf

    gm = generate_feasible_pairs(model.grid, num_pairs=1, seed=1)[0]
    value = evaluate_J(gm, listmode, model, q=1., beta=0.5)
    assert value.feasible
    assert np.isclose(value.total, value.fidelity_mass + value.neg_log + value.bb)
    assert np.isclose(value.fidelity_mass, 0.6 * gm.total_mass())
    assert np.isclose(value.bb, 0.5 * benamou_brenier(gm))

    # q = 1 is the default (unbiased) functional
    assert evaluate_J(gm, listmode, model).total == evaluate_J(gm, listmode, model, q=1.).total

    negative = gm.copy()
    negative.rho[0, 4, 4] = -1e-3
    value = evaluate_J(negative, listmode, model)
    assert not value.feasible and value.total == np.inf

    broken = gm.copy()
    broken.rho[1, 4, 4] *= 1.1
    value = evaluate_J(broken, listmode, model)
    assert not value.feasible
    assert evaluate_J(broken, listmode, model, continuity_tol=np.inf).feasible


def test_fidelity_mass_against_bins():
    geom = generate_geometry()
    gm = generate_feasible_pairs(ForwardModel(geom, 9).grid, num_pairs=1, seed=2)[0]
    empty = Listmode(None, geom, mode='discrete')

    model = ForwardModel(geom, 9, kernel=0.02, p_s=0., p_d=0.5, T_half=2.)
    value = evaluate_J(gm, empty, model)
    assert np.isclose(value.fidelity_mass, model.apply_forward(gm).total_mass() / 2.)

    # bins j = k carry no scatter, the mass term counts the full scatter share
    model = ForwardModel(geom, 9, kernel=0.02, p_s=0.2, p_d=0.5, T_half=2.)
    value = evaluate_J(gm, empty, model)
    lost = 0.2 * gm.total_mass() * np.sum(geom.cell_areas ** 2) / geom.surface_measure ** 2
    assert np.isclose(value.fidelity_mass, (model.apply_forward(gm).total_mass() + lost) / 2.)


@pytest.mark.parametrize('mode', ['discrete', 'continuous'])
def test_evaluate_J_convex_and_monotone(mode):
    geom = generate_geometry()
    model = ForwardModel(geom, 9, kernel=0.02, p_s=0.1, p_d=0.5, mode=mode)
    if mode == 'discrete':
        listmode = generate_discrete_events(geom, 40, seed=3)
    else:
        listmode = generate_continuous_events(geom, 40, seed=3)
    pairs = generate_feasible_pairs(model.grid, num_pairs=6, seed=4)
    rng = np.random.default_rng(5)
    for u, w in zip(pairs[:3], pairs[3:]):
        lam = float(rng.uniform(0.05, 0.95))
        J_u = evaluate_J(u, listmode, model, q=0.7, beta=0.3).total
        J_w = evaluate_J(w, listmode, model, q=0.7, beta=0.3).total
        J_mix = evaluate_J(lam * u + (1 - lam) * w, listmode, model, q=0.7, beta=0.3).total
        assert J_mix <= lam * J_u + (1 - lam) * J_w + 1e-9

    # the log argument grows with q
    gm = pairs[0]
    values = [evaluate_J(gm, listmode, model, q=q).total for q in (0., 0.5, 1., 2., 5.)]
    assert np.all(np.diff(values) <= 1e-12)


def test_coercivity_bound():
    geom = generate_geometry()
    model = ForwardModel(geom, 9, kernel=0.02, p_s=0.1, p_d=0.5, T_half=1.5)
    listmode = generate_discrete_events(geom, 30, seed=6)
    rng = np.random.default_rng(7)
    for i in range(50):
        gm = generate_feasible_pairs(model.grid, num_pairs=1, seed=100 + i,
                                     total_mass=rng.uniform(0.1, 200.))[0]
        mass_bound, flux_bound = coercivity_bound(gm, listmode, model, q=0.5, beta=0.2)
        assert gm.total_mass() <= mass_bound
        assert gm.flux_norm() <= flux_bound


def test_infimum_bound():
    geom = generate_geometry()
    model = ForwardModel(geom, 9, kernel=0.02, p_s=0.1, p_d=0.5)
    listmode = generate_discrete_events(geom, 30, seed=8)
    bound = infimum_bound(listmode, model, q=1., beta=1.)
    assert bound.feasible
    assert bound.bb == 0.
    assert np.isclose(uniform_measure(model, 30).total_mass(), 30 / 0.6)
    assert np.isclose(bound.fidelity_mass, 30.)

    empty = Listmode(None, geom, mode='discrete')
    assert infimum_bound(empty, model).total == 0.


if __name__ == '__main__':
    test_benamou_brenier()
    test_check_continuity()
    test_evaluate_J_trivial()
    test_fidelity_mass_against_bins()
    test_evaluate_J_convex_and_monotone('discrete')
    test_coercivity_bound()
    test_infimum_bound()
