"""
Numerical checks of the scaling invariances, used by the tests and by `dynpet verify-scaling`.
"""
import numpy as np
import pandas as pd
import scipy.stats

from ..core import random_conservative_measure, divide_into_chunks, run_chunks
from ..objective import evaluate_J
from ..listmode import sample_poisson_listmode
from .rescaling import (rescale_geometry, rescale_model, rescale_measurement, rescale_solution,
                        rescale_ground_truth, log_density_factor)


def functional_invariance(listmode, model, scale, num_pairs=20, q=1., beta=1., seed=0):
    """
    Evaluate J on random feasible pairs and the rescaled functional on their images.

    Returns
    -------
    report: pd.DataFrame
        One row per pair: J, J_hat, difference, expected (|E| log kappa), deviation
    """
    geometry_hat = rescale_geometry(model.geometry, scale)
    model_hat = rescale_model(model, scale, geometry=geometry_hat)
    if listmode.mode == 'continuous':
        listmode_hat = rescale_measurement(listmode, scale, geometry=geometry_hat)
    else:
        listmode_hat = type(listmode)(listmode.events, geometry_hat, mode='discrete', seed=listmode.seed)
    beta_hat = beta * scale.mu * scale.lam ** 2 / scale.theta
    expected = len(listmode) * log_density_factor(model, scale)

    rng = np.random.default_rng(seed)
    rows = []
    for _ in range(num_pairs):
        gm = random_conservative_measure(model.grid, rng, total_mass=rng.uniform(0.5, 5.))
        gm_hat = rescale_solution(gm, scale, grid=model_hat.grid)
        J = evaluate_J(gm, listmode, model, q=q, beta=beta).total
        J_hat = evaluate_J(gm_hat, listmode_hat, model_hat, q=q, beta=beta_hat).total
        rows.append(dict(J=J, J_hat=J_hat, difference=J - J_hat, expected=expected,
                         deviation=abs(J - J_hat - expected)))
    return pd.DataFrame(rows, columns=['J', 'J_hat', 'difference', 'expected', 'deviation'])


def cell_indices(listmode):
    """
    Flat index (i * M + j) * M + k of the bin (time bin i, detector cells j and k) of each event.
    Continuous events are binned without dropping pairs inside one detector cell.
    """
    geom = listmode.geometry
    M = geom.n_detectors
    if len(listmode) == 0:
        return np.zeros(0, dtype='int64')
    ev = listmode.events
    if listmode.mode == 'continuous':
        i = geom.time_bin_index(ev['t'])
        j = geom.detector_index(ev['a'])
        k = geom.detector_index(ev['b'])
    else:
        i, j, k = ev['i'], ev['j'], ev['k']
    return (np.asarray(i, dtype='int64') * M + j) * M + k


def _bin_count_chunk(start, stop, seeds, ground_truth, p_s, p_d, kernel):
    geom = ground_truth.geometry
    num_cells = geom.n_bins * geom.n_detectors ** 2
    total = np.zeros(num_cells)
    total_sq = np.zeros(num_cells)
    for seed in seeds[start:stop]:
        listmode = sample_poisson_listmode(ground_truth, p_s, p_d, kernel=kernel, seed=int(seed))
        counts = np.bincount(cell_indices(listmode), minlength=num_cells)
        total += counts
        total_sq += counts.astype('float64') ** 2
    return total, total_sq


def bin_count_means(ground_truth, p_s, p_d, kernel, seeds, n_jobs=1, progress_bar=False):
    """
    Mean and standard error over seeds of the event counts of every bin (i, j, k), flattened
    as in cell_indices.
    """
    seeds = np.asarray(seeds)
    n = seeds.size
    chunks = divide_into_chunks(n, max(1, n // 20))
    returns = run_chunks(_bin_count_chunk, chunks, func_args=(seeds, ground_truth, p_s, p_d, kernel),
                         n_jobs=n_jobs, progress_bar=progress_bar, job_name='bin counts')
    total = np.sum([r[0] for r in returns], axis=0)
    total_sq = np.sum([r[1] for r in returns], axis=0)
    mean = total / n
    var = np.maximum(total_sq - n * mean ** 2, 0.) / max(n - 1, 1)
    return mean, np.sqrt(var / n)


def measurement_invariance(ground_truth, p_s, p_d, kernel, scale, num_seeds=10000, first_seed=0,
                           n_jobs=1, progress_bar=False):
    """
    Compare the per bin (i, j, k) event counts of samples of the original scene and of the
    rescaled scene (disjoint seeds). Rescaling maps time bins onto time bins and detector cells
    onto detector cells, so bins are matched by index.

    Returns
    -------
    report: pd.DataFrame
        One row per bin: flat index, i, j, k, mean, mean_hat, z (difference over the combined
        standard error, 0 when neither sample has an event in the bin)
    """
    sigma = None
    if kernel is not None:
        sigma = kernel if isinstance(kernel, (int, float)) else kernel.sigma
    sigma_hat = None if sigma is None else sigma / scale.lam
    ground_truth_hat = rescale_ground_truth(ground_truth, scale)

    seeds = np.arange(first_seed, first_seed + num_seeds)
    seeds_hat = seeds + num_seeds
    mean, err = bin_count_means(ground_truth, p_s, p_d, sigma, seeds, n_jobs=n_jobs, progress_bar=progress_bar)
    mean_hat, err_hat = bin_count_means(ground_truth_hat, p_s, p_d, sigma_hat, seeds_hat, n_jobs=n_jobs,
                                        progress_bar=progress_bar)
    scale_err = np.sqrt(err ** 2 + err_hat ** 2)
    z = np.where(scale_err > 0, (mean - mean_hat) / np.maximum(scale_err, 1e-300), 0.)
    M = ground_truth.geometry.n_detectors
    i, j, k = np.unravel_index(np.arange(mean.size), (ground_truth.geometry.n_bins, M, M))
    return pd.DataFrame(dict(bin=np.arange(mean.size), i=i, j=j, k=k, mean=mean, mean_hat=mean_hat, z=z))


def z_threshold(num_bins, alpha=0.01):
    """
    Two sided normal threshold on max |z| over num_bins bins with family wise level alpha (Bonferroni).
    """
    return float(scipy.stats.norm.isf(alpha / (2 * max(int(num_bins), 1))))
