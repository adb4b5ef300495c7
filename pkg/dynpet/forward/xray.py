"""
X-ray transform on a regular voxel grid by exact ray tracing (Siddon's method).

A line is given by a unit direction theta and a point it passes through. The
parametric values where the line crosses the voxel planes are merged and sorted;
between two consecutive crossings the line stays inside one voxel, whose index is
found from the segment midpoint.
"""
import numpy as np
import scipy.sparse

from ..core import divide_into_chunks, run_chunks


_tiny_direction = 1e-14


def canonical_direction(theta):
    """
    Flip theta to the lexicographically positive orientation (first non zero component > 0).
    The line is the same, so the transform is computed identically for theta and -theta.
    """
    theta = np.asarray(theta, dtype='float64')
    nz = np.flatnonzero(np.abs(theta) > _tiny_direction)
    if nz.size > 0 and theta[nz[0]] < 0:
        return -theta
    return theta


def trace_ray(origin, h, shape, point, direction):
    """
    Voxels crossed by the full line point + r * direction and the length of the line in each.

    Parameters
    ----------
    origin: np.array (dim, )
        Lower corner of the grid box
    h: float
        Voxel size
    shape: tuple
        Grid shape
    point: np.array (dim, )
        A point on the line
    direction: np.array (dim, )
        Unit direction

    Returns
    -------
    indices: np.array int64
        Flat voxel indices (C order)
    lengths: np.array
        Intersection lengths
    """
    origin = np.asarray(origin, dtype='float64')
    point = np.asarray(point, dtype='float64')
    direction = np.asarray(direction, dtype='float64')
    dim = origin.size
    n = np.asarray(shape, dtype='int64')
    lo = origin
    hi = origin + h * n

    a_in, a_out = -np.inf, np.inf
    crossings = []
    for k in range(dim):
        if abs(direction[k]) < _tiny_direction:
            if point[k] < lo[k] or point[k] >= hi[k]:
                return np.zeros(0, dtype='int64'), np.zeros(0)
            continue
        planes = lo[k] + h * np.arange(n[k] + 1)
        alphas = (planes - point[k]) / direction[k]
        a_in = max(a_in, min(alphas[0], alphas[-1]))
        a_out = min(a_out, max(alphas[0], alphas[-1]))
        crossings.append(alphas)

    if not a_out > a_in:
        return np.zeros(0, dtype='int64'), np.zeros(0)

    alphas = np.concatenate(crossings + [[a_in, a_out]])
    alphas = np.unique(alphas[(alphas >= a_in) & (alphas <= a_out)])

    lengths = np.diff(alphas) * np.linalg.norm(direction)
    mid = 0.5 * (alphas[:-1] + alphas[1:])
    positions = point[None, :] + mid[:, None] * direction[None, :]
    ijk = np.floor((positions - lo[None, :]) / h).astype('int64')
    ijk = np.clip(ijk, 0, n[None, :] - 1)

    keep = lengths > 1e-15 * h
    indices = np.ravel_multi_index(tuple(ijk[keep].T), tuple(n))
    return indices.astype('int64'), lengths[keep]


def xray_transform(f, theta, point, origin, h):
    """
    Line integral of the gridded density `f` along the line through `point` with direction theta.

    Lines missing the grid give 0. The result does not depend on the orientation of theta.

    Parameters
    ----------
    f: np.array
        Density values per voxel, shape of the grid
    theta: np.array
        Unit direction
    point: np.array
        Point on the line (for instance center + s)
    origin: np.array
        Lower corner of the grid
    h: float
        Voxel size

    Returns
    -------
    value: float
    """
    f = np.asarray(f, dtype='float64')
    theta = canonical_direction(theta)
    indices, lengths = trace_ray(origin, h, f.shape, point, theta)
    if indices.size == 0:
        return 0.
    return float(np.sum(f.ravel()[indices] * lengths))


def _ray_matrix_chunk(start, stop, origin, h, shape, points, directions):
    rows, cols, data = [], [], []
    for i in range(start, stop):
        indices, lengths = trace_ray(origin, h, shape, points[i], canonical_direction(directions[i]))
        rows.append(np.full(indices.size, i, dtype='int64'))
        cols.append(indices)
        data.append(lengths)
    return np.concatenate(rows), np.concatenate(cols), np.concatenate(data)


def ray_matrix(origin, h, shape, points, directions, n_jobs=1, chunk_size=2000, progress_bar=False):
    """
    Sparse matrix of intersection lengths, one row per line, one column per voxel.

    Returns
    -------
    matrix: csr_matrix (num_lines, num_voxels)
    """
    points = np.atleast_2d(np.asarray(points, dtype='float64'))
    directions = np.atleast_2d(np.asarray(directions, dtype='float64'))
    num_lines = points.shape[0]
    num_voxels = int(np.prod(shape))
    if num_lines == 0:
        return scipy.sparse.csr_matrix((0, num_voxels))
    chunks = divide_into_chunks(num_lines, chunk_size)
    returns = run_chunks(_ray_matrix_chunk, chunks, func_args=(origin, h, shape, points, directions),
                         n_jobs=n_jobs, progress_bar=progress_bar, job_name='ray tracing')
    rows = np.concatenate([r[0] for r in returns])
    cols = np.concatenate([r[1] for r in returns])
    data = np.concatenate([r[2] for r in returns])
    matrix = scipy.sparse.coo_matrix((data, (rows, cols)), shape=(num_lines, num_voxels))
    return matrix.tocsr()
