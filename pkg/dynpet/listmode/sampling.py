"""
Poisson point process sampling of listmode data.

The number of events is drawn from the control stream of the seed. Event i is then
drawn alone from its own stream event_generator(seed, i), in this order:

  1. the time t, uniform in [0, T] (the slices of a ground truth all have the same mass)
  2. a uniform number deciding scatter (probability p_s / (p_s + p_d))
  3. scatter: two uniform points of the detector surface (redrawn while equal)
     detection: the particle (probability proportional to its mass), the positron
     offset, a uniform direction, then the detection map

so the list does not depend on how events are split between jobs.
"""
import numpy as np

from ..core import (control_generator, event_generator, sample_unit_vectors, check_seed,
                    divide_into_chunks, run_chunks)
from ..forward import PositronKernel
from .listmodeio import Listmode, continuous_dtype, label_dtype, canonical_order


def expected_event_count(ground_truth, p_s, p_d):
    """
    Lambda = (p_s + p_d) * ||rho|| / T_half.
    """
    return (p_s + p_d) * ground_truth.total_mass() / ground_truth.T_half


def _sample_events_chunk(start, stop, seed, ground_truth, p_s, p_d, kernel):
    geom = ground_truth.geometry
    d = geom.dim
    R = geom.radius_Dd
    events = np.zeros(stop - start, dtype=continuous_dtype(d))
    labels = np.zeros(stop - start, dtype=label_dtype)
    prob = ground_truth.masses / np.sum(ground_truth.masses)
    scatter_prob = p_s / (p_s + p_d)
    num_particles = ground_truth.get_num_particles()

    for n, i in enumerate(range(start, stop)):
        rng = event_generator(seed, i)
        t = rng.uniform(0., geom.T)
        if rng.uniform() < scatter_prob:
            a = geom.center + R * sample_unit_vectors(rng, 1, d)[0]
            b = geom.center + R * sample_unit_vectors(rng, 1, d)[0]
            while np.array_equal(a, b):
                b = geom.center + R * sample_unit_vectors(rng, 1, d)[0]
            labels[n] = (True, -1)
        else:
            p = int(rng.choice(num_particles, p=prob))
            x = geom.project_to_D(ground_truth.positions([t])[p, 0])
            x = x + kernel.sample_offsets(rng, 1)[0]
            v = sample_unit_vectors(rng, 1, d)[0]
            a, b = geom.detect_ray(x, v)
            labels[n] = (False, p)
        events[n] = (t, a, b)
    return events, labels


def sample_poisson_listmode(ground_truth, p_s, p_d, kernel=None, mode='continuous', seed=0,
                            return_labels=False, n_jobs=1, chunk_size=5000, progress_bar=False):
    """
    Draw a listmode E ~ Poi((1 / T_half) A rho) for the ground truth rho.

    Parameters
    ----------
    ground_truth: GroundTruth
        Moving particles, with T_half
    p_s: float
        Scatter probability
    p_d: float
        Direct detection probability
    kernel: PositronKernel, float or None
        Positron range (None: no range)
    mode: str
        'continuous' or 'discrete' (events binned after sampling)
    seed: int
        Unsigned 64 bits seed
    return_labels: bool
        Also return the hidden labels (scattered, source particle) per event
    n_jobs: int
        Number of jobs
    chunk_size: int
        Events per job chunk

    Returns
    -------
    listmode: Listmode
    labels: np.array
        Only if return_labels, structured array aligned with listmode.events
    """
    assert mode in ('continuous', 'discrete'), "mode must be 'continuous' or 'discrete'"
    if not (p_s >= 0 and p_d >= 0 and p_s + p_d <= 1 + 1e-12):
        raise ValueError(f'invalid probabilities p_s={p_s} p_d={p_d}')
    seed = check_seed(seed)
    geom = ground_truth.geometry
    if kernel is None or isinstance(kernel, (int, float)):
        kernel = PositronKernel(sigma=kernel, dim=geom.dim)
    kernel.check_support(geom.delta)

    lam = expected_event_count(ground_truth, p_s, p_d)
    num_events = int(control_generator(seed).poisson(lam)) if lam > 0 else 0

    if num_events > 0:
        chunks = divide_into_chunks(num_events, chunk_size)
        returns = run_chunks(_sample_events_chunk, chunks,
                             func_args=(seed, ground_truth, p_s, p_d, kernel),
                             n_jobs=n_jobs, progress_bar=progress_bar, job_name='sample events')
        events = np.concatenate([r[0] for r in returns])
        labels = np.concatenate([r[1] for r in returns])
    else:
        events = np.zeros(0, dtype=continuous_dtype(geom.dim))
        labels = np.zeros(0, dtype=label_dtype)

    order = canonical_order(events, 'continuous')
    events, labels = events[order], labels[order]
    listmode = Listmode(events, geom, mode='continuous', seed=seed)

    if mode == 'discrete':
        listmode, index = listmode.to_discrete(return_index=True)
        labels = labels[index]

    if return_labels:
        return listmode, labels
    return listmode


def scatter_fraction(labels):
    if labels.size == 0:
        return 0.
    return float(np.mean(labels['scattered']))
