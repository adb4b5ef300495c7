"""
Some utils to handle parallel jobs on top of joblib
"""
import numpy as np

import joblib
from joblib import Parallel, delayed
from tqdm import tqdm


def divide_into_chunks(num, chunk_size):
    if chunk_size is None:
        chunks = [(0, num)]
    else:
        n = num // chunk_size

        starts = np.arange(n) * chunk_size
        stops = starts + chunk_size

        starts = starts.tolist()
        stops = stops.tolist()

        if (num % chunk_size) > 0:
            starts.append(n * chunk_size)
            stops.append(num)

        chunks = list(zip(starts, stops))

    return chunks


def ensure_n_jobs(n_jobs=1):
    if n_jobs is None:
        n_jobs = 1
    elif n_jobs == -1:
        n_jobs = joblib.cpu_count()
    elif n_jobs < -1:
        n_jobs = max(1, joblib.cpu_count() + 1 + n_jobs)
    elif n_jobs == 0:
        n_jobs = 1
    return int(n_jobs)


def run_chunks(func, chunks, func_args=(), n_jobs=1, progress_bar=False, job_name='', verbose=False,
               backend='loky'):
    """
    Run `func(start, stop, *func_args)` on every chunk and return the results in chunk order.

    The order of the returned list never depends on n_jobs, so a reduction done
    by the caller in list order is reproducible.

    Parameters
    ----------
    func: callable
        func(start, stop, *func_args)
    chunks: list of tuple
        (start, stop) pairs as given by divide_into_chunks()
    func_args: tuple
        Extra arguments shared by all chunks
    n_jobs: int
        Number of jobs (-1 for all cores)
    progress_bar: bool
        Display a tqdm progress bar
    job_name: str
        Name displayed in the progress bar
    backend: str
        joblib backend

    Returns
    -------
    returns: list
        One result per chunk
    """
    n_jobs = ensure_n_jobs(n_jobs)
    n_jobs = min(n_jobs, max(1, len(chunks)))
    if verbose:
        print(job_name, 'with', 'n_jobs', n_jobs, 'num chunks', len(chunks))

    if n_jobs == 1:
        if progress_bar:
            chunks = tqdm(chunks, ascii=True, desc=job_name)
        returns = [func(start, stop, *func_args) for start, stop in chunks]
    else:
        if progress_bar:
            chunks = tqdm(chunks, ascii=True, desc=job_name)
        returns = Parallel(n_jobs=n_jobs, backend=backend)(
            delayed(func)(start, stop, *func_args) for start, stop in chunks)
    return list(returns)
