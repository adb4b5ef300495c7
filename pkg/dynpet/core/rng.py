"""
Reproducible random streams.

All the randomness of the simulator is drawn from numpy Philox (counter based)
generators with a fixed stream layout:

  * the control stream (counts, scene generation):
        Philox(key=seed, counter=[0, 0, 0, 1])
  * the stream of event `i`:
        Philox(key=seed, counter=[0, 0, i, 0])

A generator advances only the lowest counter word, so streams never overlap and
an event can be regenerated alone, in any process, from (seed, i).
"""
import numpy as np


_max_seed = 2 ** 64


def check_seed(seed):
    if seed is None:
        seed = 0
    seed = int(seed)
    if seed < 0 or seed >= _max_seed:
        raise ValueError(f'seed must be an unsigned 64 bits integer, got {seed}')
    return seed


def control_generator(seed):
    seed = check_seed(seed)
    return np.random.Generator(np.random.Philox(key=seed, counter=[0, 0, 0, 1]))


def event_generator(seed, index):
    seed = check_seed(seed)
    return np.random.Generator(np.random.Philox(key=seed, counter=[0, 0, int(index), 0]))


def sample_unit_vectors(rng, num, dim):
    """
    Uniform directions on the unit sphere S^{dim-1}.
    """
    v = rng.standard_normal((num, dim))
    norm = np.linalg.norm(v, axis=1)
    # regenerate the (practically impossible) null draws
    while np.any(norm == 0.):
        bad = norm == 0.
        v[bad] = rng.standard_normal((int(np.sum(bad)), dim))
        norm = np.linalg.norm(v, axis=1)
    return v / norm[:, None]


def sample_in_ball(rng, num, dim, radius, center=None):
    """
    Uniform points in a ball.
    """
    u = sample_unit_vectors(rng, num, dim)
    r = radius * rng.uniform(0., 1., size=num) ** (1. / dim)
    points = u * r[:, None]
    if center is not None:
        points = points + np.asarray(center, dtype='float64')[None, :]
    return points
