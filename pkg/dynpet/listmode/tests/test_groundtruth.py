import pytest
import numpy as np

from dynpet.core import GridSpec, BaseDynpetObject
from dynpet.listmode import GroundTruth, ground_truth_to_grid, toy_scene
from dynpet.core.tests.testing_tools import generate_geometry


def test_ground_truth(tmp_path):
    geom = generate_geometry()
    knots = np.zeros((2, 4, 2))
    knots[1, :, 0] = np.linspace(-0.3, 0.3, 4)
    gt = GroundTruth(geom, [1., 2.], knots, T_half=3.)
    assert gt.get_num_particles() == 2
    assert np.isclose(gt.total_mass(), 3.)

    gt.dump_to_json(tmp_path / 'gt.json')
    gt2 = BaseDynpetObject.load_from_json(tmp_path / 'gt.json')
    assert isinstance(gt2, GroundTruth)
    assert gt2.T_half == 3.
    assert np.allclose(gt2.knots, gt.knots)

    with pytest.raises(ValueError):
        GroundTruth(geom, [1., 0.], knots)
    with pytest.raises(ValueError):
        GroundTruth(geom, [1., 2.], knots, T_half=0.)
    outside = knots.copy()
    outside[0, 2] = [0.85, 0.]
    with pytest.raises(ValueError):
        GroundTruth(geom, [1., 2.], outside)


def test_toy_scene():
    geom = generate_geometry()
    gt = toy_scene(geom, 'static', mass=2.)
    assert np.allclose(gt.knots, 0.)
    assert np.isclose(gt.total_mass(), 2.)

    gt = toy_scene(geom, 'linear', speed=0.3)
    assert np.allclose(np.linalg.norm(gt.knot_velocities(), axis=2), 0.3)
    assert np.allclose(gt.positions([0.5])[0, 0], 0.)

    gt = toy_scene(geom, 'linear', num_particles=5, seed=3)
    assert gt.get_num_particles() == 5
    assert gt.check_inside()
    gt_again = toy_scene(geom, 'linear', num_particles=5, seed=3)
    assert np.array_equal(gt.knots, gt_again.knots)

    gt = toy_scene(geom, 'crossing', speed=0.4)
    assert gt.get_num_particles() == 2
    # both particles meet at the center at T / 2
    assert np.allclose(gt.positions([0.5])[:, 0], 0.)
    assert np.isclose(np.dot(gt.knot_velocities()[0, 0], gt.knot_velocities()[1, 0]), 0.)


@pytest.mark.parametrize('splat', ['linear', 'nearest'])
def test_ground_truth_to_grid_static(splat):
    geom = generate_geometry()
    grid = GridSpec(geom, 9)
    gt = toy_scene(geom, 'static', mass=2.)
    gm = ground_truth_to_grid(gt, grid, splat=splat)
    assert np.isclose(gm.total_mass(), 2.)
    assert np.allclose(gm.slice_masses(), 0.5)
    assert np.allclose(gm.rho[:, 4, 4], 0.5)
    assert gm.flux_norm() == 0.


def test_ground_truth_to_grid_moving():
    geom = generate_geometry()
    grid = GridSpec(geom, 9)
    knots = np.zeros((1, 4, 2))
    knots[0, :, 0] = 0.3 * (geom.bin_centers() - 0.5)
    gt = GroundTruth(geom, [1.], knots)
    gm = ground_truth_to_grid(gt, grid)
    assert gm.is_conservative(rtol=1e-12)
    assert np.isclose(gm.total_mass(), 1.)
    assert np.sum(gm.eta[0]) > 0
    assert np.all(gm.eta[1] == 0.)

    # close to the boundary of D the mass stays on the mask
    knots = np.zeros((1, 4, 2))
    knots[0, :, 0] = 0.8
    gm = ground_truth_to_grid(GroundTruth(geom, [1.], knots), grid)
    assert gm.mass_outside_mask() == 0.
    assert np.isclose(gm.total_mass(), 1.)


def test_ground_truth_to_grid_linearity():
    geom = generate_geometry()
    grid = GridSpec(geom, 9)
    gt = toy_scene(geom, 'linear', num_particles=3, seed=1)
    gm = ground_truth_to_grid(gt, grid)
    total_rho = np.zeros(grid.rho_shape())
    total_eta = [np.zeros(s) for s in grid.eta_shapes()]
    for i in range(3):
        single = GroundTruth(geom, gt.masses[i:i + 1], gt.knots[i:i + 1])
        gm_i = ground_truth_to_grid(single, grid)
        total_rho += gm_i.rho
        for k in range(2):
            total_eta[k] += gm_i.eta[k]
    assert np.allclose(gm.rho, total_rho)
    for k in range(2):
        assert np.allclose(gm.eta[k], total_eta[k])


def test_ground_truth_to_grid_3d():
    geom = generate_geometry(dim=3, n_detectors=20)
    grid = GridSpec(geom, 6)
    gt = toy_scene(geom, 'linear', num_particles=2, seed=2)
    gm = ground_truth_to_grid(gt, grid)
    assert gm.is_conservative(rtol=1e-12)
    assert np.isclose(gm.total_mass(), gt.total_mass())


if __name__ == '__main__':
    test_toy_scene()
    test_ground_truth_to_grid_static('linear')
    test_ground_truth_to_grid_moving()
    test_ground_truth_to_grid_linearity()
    test_ground_truth_to_grid_3d()
