from pathlib import Path

import numpy as np
import scipy.sparse
import scipy.optimize

from ..core import (GridSpec, measure_to_mask_arrays, divide_into_chunks, run_chunks, hash_dict,
                    write_header_and_slab, read_header_and_slab)
from .kernel import PositronKernel
from .xray import ray_matrix


_cache_format = 'dynpet-sparse-cache'
_cache_version = 1


class BinnedIntensity:
    """
    Measure on the bins (time bin i, detector cell j, detector cell k), shape (N, M, M).

    Diagonal bins j = k are structurally zero.
    """
    def __init__(self, values, geometry):
        values = np.asarray(values, dtype='float64')
        N, M = geometry.n_bins, geometry.n_detectors
        if values.shape != (N, M, M):
            raise ValueError(f'values must have shape ({N}, {M}, {M}), got {values.shape}')
        if np.any(values < 0):
            raise ValueError('binned intensity must be nonnegative')
        diag = np.arange(M)
        if np.any(values[:, diag, diag] != 0):
            raise ValueError('diagonal bins (j = k) must be zero')
        self.values = values
        self.geometry = geometry

    def __repr__(self):
        return f'BinnedIntensity: N={self.values.shape[0]} M={self.values.shape[1]} mass={self.total_mass():.6g}'

    def total_mass(self):
        return float(np.sum(self.values))

    def slice_masses(self):
        return np.sum(self.values, axis=(1, 2))

    def __add__(self, other):
        return BinnedIntensity(self.values + other.values, self.geometry)

    def __mul__(self, factor):
        return BinnedIntensity(self.values * float(factor), self.geometry)

    __rmul__ = __mul__


class BoundConstants:
    """
    Constants of the sandwich c_lower * ||rho|| <= d A^q rho / d nu <= c_upper * ||rho||
    valid for conservative rho.

    has_lower_bound is False when q * p_s = 0 (no scatter floor), c_lower is then 0.
    """
    def __init__(self, c_lower, c_upper, c_detection, has_lower_bound):
        self.c_lower = float(c_lower)
        self.c_upper = float(c_upper)
        self.c_detection = float(c_detection)
        self.has_lower_bound = bool(has_lower_bound)

    def __repr__(self):
        return f'BoundConstants(c_lower={self.c_lower:.6g}, c_upper={self.c_upper:.6g})'

    def __iter__(self):
        return iter((self.c_lower, self.c_upper))


def quadrature_directions(dim, num):
    """
    Deterministic direction set for the angular quadrature, symmetric under v -> -v.

    2D: num equispaced angles 2 pi (q + 1/2) / num.
    3D: num / 2 Fibonacci points on the upper hemisphere and their antipodes.
    """
    num = int(num)
    if dim == 2:
        phi = 2 * np.pi * (np.arange(num) + 0.5) / num
        return np.stack([np.cos(phi), np.sin(phi)], axis=1)
    half = num // 2
    i = np.arange(half)
    z = (i + 0.5) / half
    lon = i * np.pi * (3. - np.sqrt(5.))
    r = np.sqrt(1 - z ** 2)
    upper = np.stack([r * np.cos(lon), r * np.sin(lon), z], axis=1)
    return np.concatenate([upper, -upper], axis=0)


def _detection_chunk(start, stop, geometry, points, directions):
    M = geometry.n_detectors
    num_sub = points.shape[1]
    weight = 1. / (directions.shape[0] * num_sub)
    rows, cols = [], []
    for u in range(start, stop):
        x = points[u]
        for v in directions:
            a, b = geometry._chord(x, np.broadcast_to(v, x.shape))
            j = geometry.detector_index(a)
            k = geometry.detector_index(b)
            keep = j != k
            rows.append(j[keep] * M + k[keep])
            cols.append(np.full(int(np.sum(keep)), u, dtype='int64'))
    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    return rows, cols, np.full(rows.size, weight)


class ForwardModel:
    """
    Linear forward operator A = p_s A^s + p_d A^d from grid measures to detector pair bins,
    with the attenuated share 1 - p_s - p_d dropping out.

    The detection part is assembled once as a sparse matrix from masked voxels to
    the M * M ordered detector pairs: the positron blur (kernel stencil restricted to
    D_{delta/2}) followed by the voxel driven angular quadrature of the detection map.

    Parameters
    ----------
    geometry: ScannerGeometry
        The scanner
    nx: int
        Voxels per axis of the reconstruction grid
    kernel: PositronKernel, float or None
        Positron range kernel (a float is the gaussian width)
    p_s: float
        Scatter probability
    p_d: float
        Direct detection probability
    T_half: float
        Half life, the measurement intensity is A rho / T_half
    mode: str
        'discrete' (binned measurements) or 'continuous'
    n_directions: int or None
        Number of quadrature directions (default 16 M in 2D, 32 M in 3D)
    subsample: int
        Sub points per voxel and axis for the detection quadrature
    n_jobs: int
        Jobs for the assembly
    cache_folder: str, Path or None
        If given the detection matrix is cached on disk
    """
    def __init__(self, geometry, nx, kernel=None, p_s=0.1, p_d=0.5, T_half=1., mode='discrete',
                 n_directions=None, subsample=1, n_jobs=1, cache_folder=None, verbose=False):
        assert mode in ('discrete', 'continuous'), "mode must be 'discrete' or 'continuous'"
        if not (p_s >= 0 and p_d >= 0 and p_s + p_d <= 1 + 1e-12):
            raise ValueError(f'invalid probabilities p_s={p_s} p_d={p_d}: need 0 <= p_s, p_d and p_s + p_d <= 1')
        if not T_half > 0:
            raise ValueError(f'T_half must be positive, got {T_half}')

        if kernel is None or isinstance(kernel, (int, float)):
            kernel = PositronKernel(sigma=kernel, dim=geometry.dim)
        if kernel.dim != geometry.dim:
            raise ValueError('kernel and geometry dimensions differ')
        kernel.check_support(geometry.delta)
        if mode == 'continuous' and kernel.is_dirac():
            raise ValueError('a vanishing positron range is only valid with discrete measurements')

        self.geometry = geometry
        self.grid = GridSpec(geometry, nx)
        self.nx = self.grid.nx
        self.kernel = kernel
        self.p_s = float(p_s)
        self.p_d = float(p_d)
        self.T_half = float(T_half)
        self.mode = mode
        if n_directions is None:
            n_directions = (16 if geometry.dim == 2 else 32) * geometry.n_detectors
        self.n_directions = int(n_directions)
        self.subsample = int(subsample)
        self.n_jobs = n_jobs
        self.cache_folder = Path(cache_folder) if cache_folder is not None else None
        self.verbose = verbose

        self._blur = None
        self._detection_matrix = None

    def __repr__(self):
        return (f'ForwardModel: {self.mode} p_s={self.p_s} p_d={self.p_d} T_half={self.T_half} '
                f'{self.kernel} on {self.grid}')

    def get_params(self):
        return dict(nx=self.nx, sigma=self.kernel.sigma, p_s=self.p_s, p_d=self.p_d, T_half=self.T_half,
                    mode=self.mode, n_directions=self.n_directions, subsample=self.subsample)

    def clone(self, geometry=None, **params):
        """
        A new model with some parameters replaced (and optionally another geometry).
        """
        kwargs = self.get_params()
        kwargs.update(params)
        sigma = kwargs.pop('sigma')
        geometry = geometry if geometry is not None else self.geometry
        return ForwardModel(geometry, kernel=PositronKernel(sigma, dim=geometry.dim), n_jobs=self.n_jobs,
                            cache_folder=self.cache_folder, verbose=self.verbose, **kwargs)

    @property
    def intensity_rate(self):
        """(p_s + p_d) / T_half: expected number of events per unit of spacetime mass."""
        return (self.p_s + self.p_d) / self.T_half

    # operators
    def _support_radius(self):
        return self.geometry.radius_D + self.geometry.delta / 2

    def get_blur_matrix(self):
        """
        Positron blur from masked voxels to all voxels, shape (num_voxels, num_mask).

        Targets whose center lies outside D_{delta/2} are dropped and each column renormalized.
        """
        if self._blur is None:
            grid = self.grid
            offsets, weights = self.kernel.stencil(grid.h)
            src = np.array(np.unravel_index(grid.mask_indices, grid.shape)).T
            targets = src[:, None, :] + offsets[None, :, :]
            inside = np.all((targets >= 0) & (targets < grid.nx), axis=2)
            targets = np.clip(targets, 0, grid.nx - 1)
            flat = np.ravel_multi_index(tuple(np.moveaxis(targets, 2, 0)), grid.shape)
            dist = np.linalg.norm(grid.centers[flat] - self.geometry.center, axis=2)
            inside &= dist <= self._support_radius() * (1 + 1e-12)

            w = np.where(inside, weights[None, :], 0.)
            w /= np.sum(w, axis=1, keepdims=True)
            cols = np.repeat(np.arange(grid.num_mask)[:, None], offsets.shape[0], axis=1)
            self._blur = scipy.sparse.coo_matrix(
                (w[inside], (flat[inside], cols[inside])), shape=(grid.num_voxels, grid.num_mask)).tocsr()
        return self._blur

    def _cache_file(self):
        key = dict(geometry=self.geometry.to_dict()['kwargs'], nx=self.nx, sigma=self.kernel.sigma,
                   n_directions=self.n_directions, subsample=self.subsample)
        return self.cache_folder / f'detection_{hash_dict(key)}.bin', hash_dict(key)

    def _assemble_detection(self):
        grid = self.grid
        geom = self.geometry
        M = geom.n_detectors
        radius = self._support_radius()
        dist = np.linalg.norm(grid.centers - geom.center, axis=1)
        voxels = np.flatnonzero(dist <= radius * (1 + 1e-12))

        S = self.subsample
        sub = grid.h * ((np.arange(S) + 0.5) / S - 0.5)
        sub = np.stack(np.meshgrid(*([sub] * geom.dim), indexing='ij'), axis=-1).reshape(-1, geom.dim)
        points = grid.centers[voxels][:, None, :] + sub[None, :, :]
        w = points - geom.center
        r = np.linalg.norm(w, axis=2, keepdims=True)
        points = geom.center + w * np.minimum(1., radius / np.maximum(r, 1e-300))

        directions = quadrature_directions(geom.dim, self.n_directions)
        chunks = divide_into_chunks(voxels.size, 64)
        returns = run_chunks(_detection_chunk, chunks, func_args=(geom, points, directions),
                             n_jobs=self.n_jobs, progress_bar=self.verbose, job_name='assemble detection')
        rows = np.concatenate([r[0] for r in returns])
        cols = voxels[np.concatenate([r[1] for r in returns])]
        data = np.concatenate([r[2] for r in returns])
        matrix = scipy.sparse.coo_matrix((data, (rows, cols)), shape=(M * M, grid.num_voxels)).tocsr()
        matrix.sum_duplicates()
        return matrix

    def get_detection_matrix(self):
        """
        A^d as a csr matrix (M * M, num_mask) acting on the masked voxel masses of one time slice.
        Row j * M + k is the ordered detector pair (j, k).
        """
        if self._detection_matrix is None:
            raw = None
            if self.cache_folder is not None:
                cache_file, key = self._cache_file()
                if cache_file.exists():
                    raw = load_sparse_cache(cache_file, key)
                    if self.verbose:
                        print('load detection matrix from', cache_file)
            if raw is None:
                raw = self._assemble_detection()
                if self.cache_folder is not None:
                    save_sparse_cache(raw, cache_file, key)
            self._detection_matrix = (raw @ self.get_blur_matrix()).tocsr()
        return self._detection_matrix

    # slice level operators
    def _slice_to_mask(self, rho_slice):
        rho_slice = np.asarray(rho_slice, dtype='float64')
        if np.any(rho_slice < 0):
            raise ValueError('negative mass in rho')
        if rho_slice.ndim == 1 and rho_slice.size == self.grid.num_mask:
            return rho_slice
        flat = rho_slice.reshape(-1)
        if flat.size != self.grid.num_voxels:
            raise ValueError('rho slice does not match the grid')
        outside = np.ones(self.grid.num_voxels, dtype=bool)
        outside[self.grid.mask_indices] = False
        if np.any(flat[outside] > 0):
            raise ValueError('rho slice has mass outside D')
        return flat[self.grid.mask_indices]

    def _scatter_pattern(self):
        areas = self.geometry.cell_areas
        pattern = np.outer(areas, areas) / self.geometry.surface_measure ** 2
        np.fill_diagonal(pattern, 0.)
        return pattern

    def apply_scatter(self, rho_slice):
        """
        Uniform scatter intensity of one slice: bin (j, k) receives ||rho|| |G_j| |G_k| / H^2.

        Returns
        -------
        values: np.array (M, M)
        """
        mass = float(np.sum(self._slice_to_mask(rho_slice)))
        return mass * self._scatter_pattern()

    def apply_detection(self, rho_slice):
        """
        Scatterless detection of one slice.

        Returns
        -------
        values: np.array (M, M)
        """
        x = self._slice_to_mask(rho_slice)
        M = self.geometry.n_detectors
        return (self.get_detection_matrix() @ x).reshape(M, M)

    def _check_measure(self, grid_measure):
        if grid_measure.grid.rho_shape() != self.grid.rho_shape():
            raise ValueError('grid measure does not match the model grid')
        if np.any(grid_measure.rho < 0):
            raise ValueError('negative mass in rho')

    def apply_unbiased_forward(self, grid_measure, q):
        """
        A^q rho = q p_s A^s rho + p_d A^d rho, slice by slice.
        """
        if q < 0:
            raise ValueError(f'q must be nonnegative, got {q}')
        self._check_measure(grid_measure)
        geom = self.geometry
        N, M = geom.n_bins, geom.n_detectors
        rho_mask, _ = measure_to_mask_arrays(grid_measure)
        values = np.zeros((N, M, M))
        if self.p_d > 0:
            det = (self.get_detection_matrix() @ rho_mask.T).T
            values += self.p_d * det.reshape(N, M, M)
        if q * self.p_s > 0:
            masses = np.sum(rho_mask, axis=1)
            values += q * self.p_s * masses[:, None, None] * self._scatter_pattern()[None, :, :]
        return BinnedIntensity(values, geom)

    def apply_forward(self, grid_measure):
        return self.apply_unbiased_forward(grid_measure, 1.)

    def get_event_operator(self, listmode, q=1.):
        return EventOperator(self, listmode, q)

    def density_at_event(self, grid_measure, listmode, q=1.):
        """
        d A^q rho / d nu at every event of the listmode (with the 1 / T_half intensity factor),
        in the listmode event order.
        """
        if len(listmode) == 0:
            return np.zeros(0)
        op = EventOperator(self, listmode, q)
        rho_mask, _ = measure_to_mask_arrays(grid_measure)
        return op.matvec(rho_mask)[op.event_to_row]

    def bound_constant(self, q=1.):
        """
        Sandwich constants for the event densities of conservative rho.

        Returns
        -------
        bounds: BoundConstants
        """
        geom = self.geometry
        H = geom.surface_measure
        has_lower = q * self.p_s > 0
        if self.mode == 'continuous':
            c_lower = q * self.p_s / (H ** 2 * geom.T * self.T_half)
            h = self.grid.h
            blur = self.get_blur_matrix()
            w_max = float(blur.data.max())
            r = self.kernel.stencil_radius(h)
            c_det = w_max * (2 * r + 1) * h * np.sqrt(geom.dim) / h ** geom.dim
            c_upper = c_lower + self.p_d * geom.detection_density_sup() * c_det / (geom.T * self.T_half)
        else:
            areas = geom.cell_areas
            c_lower = q * self.p_s * np.min(areas) ** 2 / (H ** 2 * geom.n_bins * self.T_half)
            c_det = 1.
            c_upper = (q * self.p_s * np.max(areas) ** 2 / H ** 2 + self.p_d) / (geom.n_bins * self.T_half)
        return BoundConstants(c_lower, c_upper, c_det, has_lower)


class EventOperator:
    """
    The linear map rho -> (d A^q rho / d nu)(e) over the events e of a listmode, including the
    1 / T_half factor. It acts on masked voxel masses rho of shape (N, num_mask).

    Rows are sorted by time slice. In discrete mode identical bins share one row and
    `weights` holds their multiplicity, in continuous mode each event is a row of weight 1.

    Each row is detection_row . rho[t] + q * scatter_coef * sum(rho[t]).
    """
    def __init__(self, model, listmode, q=1.):
        if q < 0:
            raise ValueError(f'q must be nonnegative, got {q}')
        if not listmode.geometry.is_same(model.geometry):
            raise ValueError('listmode and model geometries differ')
        self.model = model
        self.q = float(q)
        geom = model.geometry
        N, M = geom.n_bins, geom.n_detectors
        H = geom.surface_measure
        T_half = model.T_half

        if model.mode == 'discrete':
            if listmode.mode == 'continuous':
                listmode = listmode.to_discrete()
            ev = listmode.events
            keys = (ev['i'] * M + ev['j']) * M + ev['k']
            unique_keys, event_to_row, counts = np.unique(keys, return_inverse=True, return_counts=True)
            slice_index = unique_keys // (M * M)
            pair = unique_keys % (M * M)
            j, k = pair // M, pair % M
            self.detection = (model.p_d / T_half) * model.get_detection_matrix()[pair] if model.p_d > 0 \
                else scipy.sparse.csr_matrix((unique_keys.size, model.grid.num_mask))
            areas = geom.cell_areas
            self.scatter_coef = model.p_s * areas[j] * areas[k] / (H ** 2 * T_half)
            self.weights = counts.astype('float64')
            self.event_to_row = event_to_row.reshape(-1)
        else:
            if listmode.mode != 'continuous':
                raise ValueError('a discrete listmode cannot be used with a continuous model')
            ev = listmode.events
            slices = geom.time_bin_index(ev['t'])
            order = np.argsort(slices, kind='stable')
            slice_index = slices[order]
            a, b = ev['a'][order], ev['b'][order]
            theta = (b - a) / np.linalg.norm(b - a, axis=1, keepdims=True)
            grid = model.grid
            lengths = ray_matrix(grid.origin, grid.h, grid.shape, a, theta, n_jobs=model.n_jobs)
            g = geom.detection_density_factor(a, b)
            scale = model.p_d * g / (grid.voxel_volume * geom.bin_width * T_half)
            self.detection = (scipy.sparse.diags(scale) @ lengths @ model.get_blur_matrix()).tocsr()
            self.scatter_coef = np.full(order.size, model.p_s / (H ** 2 * geom.bin_width * T_half))
            self.weights = np.ones(order.size)
            self.event_to_row = np.empty(order.size, dtype='int64')
            self.event_to_row[order] = np.arange(order.size)

        self.slice_index = np.asarray(slice_index, dtype='int64')
        self.slice_ptr = np.searchsorted(self.slice_index, np.arange(N + 1))
        self.num_rows = self.slice_index.size
        self.num_cols = model.grid.num_mask
        self.n_bins = N

    def __repr__(self):
        return f'EventOperator: {self.num_rows} rows q={self.q}'

    def detection_part(self, rho_mask):
        out = np.zeros(self.num_rows)
        for t in range(self.n_bins):
            r0, r1 = self.slice_ptr[t], self.slice_ptr[t + 1]
            if r1 > r0:
                out[r0:r1] = self.detection[r0:r1] @ rho_mask[t]
        return out

    def scatter_part(self, rho_mask):
        """Scatter density per row without the q factor."""
        masses = np.sum(rho_mask, axis=1)
        return self.scatter_coef * masses[self.slice_index]

    def matvec(self, rho_mask):
        rho_mask = np.asarray(rho_mask, dtype='float64')
        return self.detection_part(rho_mask) + self.q * self.scatter_part(rho_mask)

    def rmatvec(self, y):
        """
        Adjoint map from row values to (N, num_mask).
        """
        y = np.asarray(y, dtype='float64')
        out = np.zeros((self.n_bins, self.num_cols))
        scat = self.q * self.scatter_coef * y
        for t in range(self.n_bins):
            r0, r1 = self.slice_ptr[t], self.slice_ptr[t + 1]
            if r1 > r0:
                out[t] = self.detection[r0:r1].T @ y[r0:r1] + np.sum(scat[r0:r1])
        return out


def save_sparse_cache(matrix, file_path, key):
    coo = matrix.tocoo()
    header = dict(format=_cache_format, version=_cache_version, key=key, shape=list(coo.shape), nnz=int(coo.nnz))
    write_header_and_slab(file_path, header, [coo.data.astype('<f8'), coo.row.astype('<u4'), coo.col.astype('<u4')])


def load_sparse_cache(file_path, key=None):
    """
    Read a sparse matrix cache, returns None if the key does not match.
    """
    header, raw = read_header_and_slab(file_path)
    if header.get('format') != _cache_format:
        raise ValueError(f'{file_path} is not a sparse cache file')
    if key is not None and header['key'] != key:
        return None
    nnz = header['nnz']
    if len(raw) != nnz * 16:
        raise ValueError(f'{file_path}: truncated cache')
    data = np.frombuffer(raw[:8 * nnz], dtype='<f8')
    rows = np.frombuffer(raw[8 * nnz:12 * nnz], dtype='<u4')
    cols = np.frombuffer(raw[12 * nnz:], dtype='<u4')
    return scipy.sparse.coo_matrix((data.astype('float64'), (rows.astype('int64'), cols.astype('int64'))),
                                   shape=tuple(header['shape'])).tocsr()


def discretize(sampler, geometry, n_quad=4):
    """
    Bin a continuous intensity density on [0, T] x dD x dD (with respect to dt x H x H):
    midpoint quadrature in time and cell_quadrature on the detector cells.

    Parameters
    ----------
    sampler: callable
        sampler(t, a, b) with t (num, ), a and b (num, dim), returns (num, ) densities
    geometry: ScannerGeometry
    n_quad: int
        Quadrature points per bin and axis

    Returns
    -------
    intensity: BinnedIntensity
    """
    N, M = geometry.n_bins, geometry.n_detectors
    pts, wts, cell = [], [], []
    for j in range(M):
        p, w = geometry.cell_quadrature(j, n_quad)
        pts.append(p)
        wts.append(w)
        cell.append(np.full(w.size, j))
    pts = np.concatenate(pts)
    wts = np.concatenate(wts)
    cell = np.concatenate(cell)
    P = pts.shape[0]
    ia, ib = np.meshgrid(np.arange(P), np.arange(P), indexing='ij')
    ia, ib = ia.ravel(), ib.ravel()
    pair_cell = cell[ia] * M + cell[ib]
    pair_weight = wts[ia] * wts[ib]

    dt = geometry.bin_width / n_quad
    values = np.zeros((N, M * M))
    for i in range(N):
        for s in range(n_quad):
            t = (i + (s + 0.5) / n_quad) * geometry.bin_width
            dens = np.asarray(sampler(np.full(ia.size, t), pts[ia], pts[ib]), dtype='float64')
            values[i] += np.bincount(pair_cell, weights=dens * pair_weight * dt, minlength=M * M)
    values = values.reshape(N, M, M)
    diag = np.arange(M)
    values[:, diag, diag] = 0.
    return BinnedIntensity(np.maximum(values, 0.), geometry)


def wasserstein_1(mass0, mass1, points):
    """
    Exact W1 distance between two discrete measures of equal mass on `points` (linear program).
    """
    n = points.shape[0]
    cost = np.linalg.norm(points[:, None, :] - points[None, :, :], axis=2).ravel()
    ones = scipy.sparse.csr_matrix(np.ones((1, n)))
    eye = scipy.sparse.identity(n, format='csr')
    A_eq = scipy.sparse.vstack([scipy.sparse.kron(eye, ones), scipy.sparse.kron(ones, eye)]).tocsr()
    b_eq = np.concatenate([mass0, mass1])
    res = scipy.optimize.linprog(cost, A_eq=A_eq, b_eq=b_eq, bounds=(0, None), method='highs')
    if not res.success:
        raise RuntimeError(f'transport linear program failed: {res.message}')
    return float(res.fun)


def empirical_lipschitz_ratio(model, grid_measure1, grid_measure2, listmode, q=1.):
    """
    max_e |density_1(e) - density_2(e)| divided by the sum over time slices of the W1 distance
    between the slices. Both measures must have the same slice masses.
    """
    rho1, _ = measure_to_mask_arrays(grid_measure1)
    rho2, _ = measure_to_mask_arrays(grid_measure2)
    m1, m2 = rho1.sum(axis=1), rho2.sum(axis=1)
    if np.max(np.abs(m1 - m2)) > 1e-9 * max(np.max(np.abs(m1)), 1e-300):
        raise ValueError('slice masses differ, W1 is undefined')
    points = model.grid.centers[model.grid.mask_indices]
    distance = sum(wasserstein_1(rho1[t], rho2[t], points) for t in range(rho1.shape[0]))
    d1 = model.density_at_event(grid_measure1, listmode, q)
    d2 = model.density_at_event(grid_measure2, listmode, q)
    diff = float(np.max(np.abs(d1 - d2))) if d1.size else 0.
    if distance == 0:
        return 0. if diff == 0 else np.inf
    return diff / distance
