import numpy as np

from dynpet.core import BaseTrajectories, BaseDynpetObject
from dynpet.core.tests.testing_tools import generate_geometry


def _linear_knots(geom, x0, v):
    t = geom.bin_centers()
    return (np.asarray(x0)[None, :] + t[:, None] * np.asarray(v)[None, :])[None, :, :]


def test_positions():
    geom = generate_geometry(n_bins=10)
    knots = _linear_knots(geom, [-0.25, 0.], [0.5, 0.])
    traj = BaseTrajectories(geom, [1.], knots)
    pos = traj.positions(np.array([0., 0.5, 1.]))
    # extrapolation on the end half bins is linear
    assert np.allclose(pos[0], [[-0.25, 0.], [0., 0.], [0.25, 0.]])


def test_kinetic_energy():
    geom = generate_geometry(n_bins=10)
    knots = _linear_knots(geom, [-0.25, 0.], [0.5, 0.])
    traj = BaseTrajectories(geom, [1.], knots)
    # int |v|^2 dt = 0.25 exactly for constant velocity
    assert np.isclose(traj.kinetic_energy()[0], 0.25, rtol=1e-12)

    # gradient against finite differences
    rng = np.random.default_rng(0)
    knots = rng.uniform(-0.3, 0.3, size=(2, 10, 2))
    traj = BaseTrajectories(geom, [1., 2.], knots)
    grad = traj.kinetic_energy_gradient()
    eps = 1e-6
    k2 = knots.copy()
    k2[1, 3, 0] += eps
    fd = (BaseTrajectories(geom, [1., 2.], k2).kinetic_energy()[1] - traj.kinetic_energy()[1]) / eps
    assert np.isclose(fd, grad[1, 3, 0], rtol=1e-4)


def test_static_single_bin():
    geom = generate_geometry(n_bins=1)
    traj = BaseTrajectories(geom, [2.], [[[0.1, 0.2]]])
    assert np.allclose(traj.positions([0.3])[0, 0], [0.1, 0.2])
    assert traj.kinetic_energy()[0] == 0.
    assert np.isclose(traj.total_mass(), 2.)


def test_dump(tmp_path):
    geom = generate_geometry(n_bins=3)
    traj = BaseTrajectories(geom, [1., 2.], np.zeros((2, 3, 2)))
    traj.dump_to_json(tmp_path / 'traj.json')
    traj2 = BaseDynpetObject.load_from_json(tmp_path / 'traj.json')
    assert np.array_equal(traj2.masses, traj.masses)
    assert traj2.geometry.is_same(geom)


if __name__ == '__main__':
    test_positions()
    test_kinetic_energy()
    test_static_single_bin()
