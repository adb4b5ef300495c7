import pytest
import numpy as np

from dynpet.debias import heuristic_q
from dynpet.forward import PositronKernel
from dynpet.core.tests.testing_tools import generate_geometry


def test_heuristic_q_discrete():
    # perimeter pi, delta 0.2
    geom = generate_geometry(radius_D=0.3, radius_Dd=0.5, n_detectors=100)
    q = heuristic_q(geom, p_s=0.2, p_d=0.8, total_mass=50.)
    assert np.isclose(q, 0.8 * 100 / (0.2 * 50) * np.pi / 0.2 ** 2)
    assert np.isclose(q, 628.3185, rtol=1e-6)

    # never below 1
    assert heuristic_q(geom, p_s=0.2, p_d=0.8, total_mass=1e9) == 1.


def test_heuristic_q_continuous():
    geom = generate_geometry()
    kernel = PositronKernel(0.05, dim=2)
    q = heuristic_q(geom, 0.1, 0.5, 10., mode='continuous', kernel=kernel)
    expected = 0.5 * kernel.peak() / (0.1 * 10.) * geom.surface_measure / geom.delta ** 2
    assert np.isclose(q, max(1., expected))
    assert np.isclose(heuristic_q(geom, 0.1, 0.5, 10., mode='continuous', kernel=0.05), q)

    # a sharper kernel needs a larger q
    assert heuristic_q(geom, 0.1, 0.5, 10., mode='continuous', kernel=0.02) > q


def test_heuristic_q_errors():
    geom = generate_geometry()
    with pytest.raises(ValueError):
        heuristic_q(geom, 0., 0.5, 10.)
    with pytest.raises(ValueError):
        heuristic_q(geom, 0.1, 0.5, 0.)
    with pytest.raises(ValueError):
        heuristic_q(geom, 0.1, 0.5, 10., mode='continuous', kernel=None)
    with pytest.raises(AssertionError):
        heuristic_q(geom, 0.1, 0.5, 10., mode='voxel')


if __name__ == '__main__':
    test_heuristic_q_discrete()
