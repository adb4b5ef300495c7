import pytest
import numpy as np

from dynpet.core import control_generator, event_generator, sample_unit_vectors, sample_in_ball


def test_streams_are_reproducible():
    a = event_generator(12, 5).uniform(size=4)
    b = event_generator(12, 5).uniform(size=4)
    assert np.array_equal(a, b)
    c = event_generator(12, 6).uniform(size=4)
    assert not np.array_equal(a, c)
    d = control_generator(12).uniform(size=4)
    assert not np.array_equal(a, d)


def test_bad_seed():
    with pytest.raises(ValueError):
        control_generator(-1)
    with pytest.raises(ValueError):
        control_generator(2 ** 64)
    control_generator(2 ** 64 - 1)


def test_samplers():
    rng = np.random.default_rng(0)
    v = sample_unit_vectors(rng, 1000, 3)
    assert np.allclose(np.linalg.norm(v, axis=1), 1.)
    x = sample_in_ball(rng, 1000, 2, 0.5)
    assert np.all(np.linalg.norm(x, axis=1) <= 0.5)


if __name__ == '__main__':
    test_streams_are_reproducible()
    test_bad_seed()
    test_samplers()
