import numpy as np

from dynpet.core import GridSpec, GridMeasure, random_conservative_measure, measure_to_mask_arrays, mask_arrays_to_measure
from dynpet.core.tests.testing_tools import generate_geometry, generate_grid


def test_grid_spec():
    grid = generate_grid(nx=9)
    assert np.isclose(grid.h, 0.2)
    assert grid.centers.shape == (81, 2)
    # center voxel is inside D, corners are not
    assert grid.mask[4, 4]
    assert not grid.mask[0, 0]
    assert grid.voxel_index(np.array([0., 0.]))[0] == np.ravel_multi_index((4, 4), grid.shape)

    div, avg = grid.get_mask_operators()
    # no flux leaves the mask
    assert np.allclose(np.asarray(div.sum(axis=0)).ravel(), 0.)
    assert np.allclose(np.asarray(avg.sum(axis=1)).ravel(), 1.)


def test_grid_measure():
    grid = generate_grid(nx=9)
    gm = GridMeasure.uniform(grid, 2.)
    assert np.isclose(gm.total_mass(), 2.)
    assert gm.is_conservative()
    assert gm.mass_outside_mask() == 0.

    gm2 = 0.5 * gm + gm
    assert np.isclose(gm2.total_mass(), 3.)


def test_random_conservative_measure():
    grid = generate_grid(nx=9)
    rng = np.random.default_rng(0)
    gm = random_conservative_measure(grid, rng, total_mass=3.)
    assert np.all(gm.rho.reshape(grid.n_bins, -1)[:, grid.mask_indices] > 0)
    assert np.isclose(gm.total_mass(), 3.)
    assert gm.is_conservative(rtol=1e-12)
    assert gm.flux_norm() > 0

    rho_mask, eta_mask = measure_to_mask_arrays(gm)
    gm_back = mask_arrays_to_measure(grid, rho_mask, eta_mask)
    assert np.array_equal(gm_back.rho, gm.rho)
    for e0, e1 in zip(gm_back.eta, gm.eta):
        assert np.array_equal(e0, e1)


def test_grid_3d():
    geom = generate_geometry(dim=3, n_detectors=20)
    grid = GridSpec(geom, 6)
    assert grid.rho_shape() == (geom.n_bins, 6, 6, 6)
    assert [s[1:] for s in grid.eta_shapes()] == [(5, 6, 6), (6, 5, 6), (6, 6, 5)]
    gm = random_conservative_measure(grid, np.random.default_rng(1))
    assert gm.is_conservative(rtol=1e-12)


if __name__ == '__main__':
    test_grid_spec()
    test_grid_measure()
    test_random_conservative_measure()
    test_grid_3d()
