import numpy as np

from .base import BaseDynpetObject
from .core_tools import hash_dict


_surface_tol = 1e-9


class ScannerGeometry(BaseDynpetObject):
    """
    Physical setup of the scanner: a reconstruction ball D (where the tracer stays)
    concentric with the detector ball, whose boundary sphere is partitioned into
    `n_detectors` cells of equal measure, and the time interval [0, T] split into
    `n_bins` bins.

    The cells are equal arcs in 2D (cell j is the half-open angular interval
    [2*pi*j/M, 2*pi*(j+1)/M)) and a recursive zonal equal-area partition in 3D.

    Parameters
    ----------
    dim: int
        Spatial dimension, 2 or 3
    radius_D: float
        Radius of the reconstruction ball D
    radius_Dd: float
        Radius of the detector ball
    n_detectors: int
        Number of detector cells M (>= 4)
    n_bins: int
        Number of time bins N (>= 1)
    T: float
        Time horizon in s
    center: array or None
        Common center of the balls (default origin)
    """
    def __init__(self, dim, radius_D, radius_Dd, n_detectors, n_bins, T, center=None):
        BaseDynpetObject.__init__(self)

        if dim not in (2, 3):
            raise ValueError(f'dim must be 2 or 3, got {dim}')
        if not radius_D > 0:
            raise ValueError(f'radius_D must be positive, got {radius_D}')
        if not radius_Dd > radius_D:
            raise ValueError(f'radius_Dd ({radius_Dd}) must be larger than radius_D ({radius_D}): '
                             'the margin delta must be positive')
        if int(n_detectors) != n_detectors or n_detectors < 4:
            raise ValueError(f'n_detectors must be an integer >= 4, got {n_detectors}')
        if int(n_bins) != n_bins or n_bins < 1:
            raise ValueError(f'n_bins must be an integer >= 1, got {n_bins}')
        if not T > 0:
            raise ValueError(f'T must be positive, got {T}')

        if center is None:
            center = np.zeros(dim)
        center = np.asarray(center, dtype='float64')
        if center.shape != (dim, ):
            raise ValueError(f'center must have shape ({dim},)')

        self.dim = int(dim)
        self.radius_D = float(radius_D)
        self.radius_Dd = float(radius_Dd)
        self.delta = self.radius_Dd - self.radius_D
        self.n_detectors = int(n_detectors)
        self.n_bins = int(n_bins)
        self.T = float(T)
        self.bin_width = self.T / self.n_bins
        self.center = center
        self.center.setflags(write=False)

        self._kwargs = dict(dim=self.dim, radius_D=self.radius_D, radius_Dd=self.radius_Dd,
                            n_detectors=self.n_detectors, n_bins=self.n_bins, T=self.T,
                            center=[float(c) for c in center])

        if self.dim == 2:
            self._arc_angle = 2 * np.pi / self.n_detectors
        else:
            self._zone_edges, self._zone_counts = equal_area_zones(self.n_detectors)
            self._zone_offsets = np.concatenate([[0], np.cumsum(self._zone_counts)])

        self.cell_areas = self._compute_cell_areas()
        self.cell_areas.setflags(write=False)
        self.representative_points = self._compute_representative_points()
        self.representative_points.setflags(write=False)

    def __repr__(self):
        return (f'ScannerGeometry: {self.dim}D radius_D={self.radius_D} radius_Dd={self.radius_Dd} '
                f'M={self.n_detectors} N={self.n_bins} T={self.T}')

    @property
    def surface_measure(self):
        """Hausdorff measure of the detector surface."""
        if self.dim == 2:
            return 2 * np.pi * self.radius_Dd
        else:
            return 4 * np.pi * self.radius_Dd ** 2

    def get_hash(self):
        return hash_dict(self._kwargs)

    def is_same(self, other):
        return self.get_hash() == other.get_hash()

    def bin_centers(self):
        return (np.arange(self.n_bins) + 0.5) * self.bin_width

    def _compute_cell_areas(self):
        M = self.n_detectors
        if self.dim == 2:
            return np.full(M, self._arc_angle * self.radius_Dd)
        areas = np.zeros(M)
        R2 = self.radius_Dd ** 2
        for z, count in enumerate(self._zone_counts):
            c0, c1 = np.cos(self._zone_edges[z]), np.cos(self._zone_edges[z + 1])
            s = self._zone_offsets[z]
            areas[s:s + count] = R2 * (c0 - c1) * 2 * np.pi / count
        return areas

    def _compute_representative_points(self):
        M = self.n_detectors
        R = self.radius_Dd
        if self.dim == 2:
            angles = (np.arange(M) + 0.5) * self._arc_angle
            points = np.stack([np.cos(angles), np.sin(angles)], axis=1) * R
        else:
            points = np.zeros((M, 3))
            num_zones = self._zone_counts.size
            for z, count in enumerate(self._zone_counts):
                s = self._zone_offsets[z]
                if z == 0:
                    colat = np.zeros(1)
                elif z == num_zones - 1:
                    colat = np.full(1, np.pi)
                else:
                    colat = np.full(count, 0.5 * (self._zone_edges[z] + self._zone_edges[z + 1]))
                lon = (np.arange(count) + 0.5) * 2 * np.pi / count
                points[s:s + count] = _spherical_to_cartesian(colat, lon) * R
        return points + self.center[None, :]

    # geometry of points
    def contains(self, points, margin=0.):
        """
        True for points in the closed ball of radius radius_D + margin.
        """
        points = np.asarray(points, dtype='float64')
        r = np.linalg.norm(points - self.center, axis=-1)
        return r <= self.radius_D + margin

    def project_to_D(self, points):
        """
        Radial projection of points onto the reconstruction ball D.
        """
        points = np.asarray(points, dtype='float64')
        w = points - self.center
        r = np.linalg.norm(w, axis=-1, keepdims=True)
        factor = np.minimum(1., self.radius_D / np.maximum(r, 1e-300))
        return self.center + w * factor

    def on_surface(self, points, tol=_surface_tol):
        points = np.asarray(points, dtype='float64')
        r = np.linalg.norm(points - self.center, axis=-1)
        return np.abs(r - self.radius_Dd) <= tol * max(1., self.radius_Dd)

    def time_bin_index(self, t):
        """
        Index of the half-open time bin containing t, t = T falls in the last bin.
        """
        t = np.asarray(t, dtype='float64')
        if np.any((t < 0) | (t > self.T)) or np.any(~np.isfinite(t)):
            raise ValueError('event time outside [0, T]')
        ind = np.floor(t / self.bin_width).astype('int64')
        return np.minimum(ind, self.n_bins - 1)

    def detector_index(self, points):
        """
        Index j of the detector cell containing each point of the detector surface.

        Parameters
        ----------
        points: np.array
            Shape (dim, ) or (num, dim)

        Returns
        -------
        index: int or np.array of int64
        """
        points = np.asarray(points, dtype='float64')
        single = points.ndim == 1
        points = np.atleast_2d(points)
        if not np.all(self.on_surface(points)):
            raise ValueError('point off the detector surface')
        w = points - self.center[None, :]
        lon = np.mod(np.arctan2(w[:, 1], w[:, 0]), 2 * np.pi)
        if self.dim == 2:
            ind = np.floor(lon / self._arc_angle).astype('int64')
            ind = np.minimum(ind, self.n_detectors - 1)
        else:
            cos_colat = np.clip(w[:, 2] / np.linalg.norm(w, axis=1), -1., 1.)
            colat = np.arccos(cos_colat)
            zone = np.searchsorted(self._zone_edges[1:-1], colat, side='right')
            counts = self._zone_counts[zone]
            k = np.floor(lon * counts / (2 * np.pi)).astype('int64')
            k = np.minimum(k, counts - 1)
            ind = self._zone_offsets[zone] + k
        if single:
            return int(ind[0])
        return ind

    def cell_quadrature(self, j, n):
        """
        Midpoint quadrature on detector cell j.

        In 3D the midpoint rule is done in (cos(colatitude), longitude) coordinates which are
        area preserving, so weights are exactly equal.

        Returns
        -------
        points: np.array (num, dim)
        weights: np.array (num, )
            Weights summing to the cell measure
        """
        n = int(n)
        R = self.radius_Dd
        if self.dim == 2:
            a0 = j * self._arc_angle
            angles = a0 + (np.arange(n) + 0.5) * self._arc_angle / n
            points = np.stack([np.cos(angles), np.sin(angles)], axis=1) * R
            weights = np.full(n, self.cell_areas[j] / n)
        else:
            zone = np.searchsorted(self._zone_offsets[1:], j, side='right')
            count = self._zone_counts[zone]
            k = j - self._zone_offsets[zone]
            u0, u1 = np.cos(self._zone_edges[zone]), np.cos(self._zone_edges[zone + 1])
            u = u0 + (np.arange(n) + 0.5) * (u1 - u0) / n
            lon0 = k * 2 * np.pi / count
            lon = lon0 + (np.arange(n) + 0.5) * 2 * np.pi / count / n
            uu, ll = np.meshgrid(u, lon, indexing='ij')
            colat = np.arccos(np.clip(uu.ravel(), -1, 1))
            points = _spherical_to_cartesian(colat, ll.ravel()) * R
            weights = np.full(n * n, self.cell_areas[j] / (n * n))
        return points + self.center[None, :], weights

    # rays
    def detect_ray(self, x, v):
        """
        The detection map: endpoints (a, b) of the line x + R v on the detector surface,
        oriented so that (b - a) / |b - a| = v.

        Parameters
        ----------
        x: np.array
            Point(s) in D_{delta/2}, shape (dim, ) or (num, dim)
        v: np.array
            Unit direction(s), same shape as x

        Returns
        -------
        a, b: np.array
        """
        x = np.asarray(x, dtype='float64')
        v = np.asarray(v, dtype='float64')
        if x.shape != v.shape:
            raise ValueError('x and v must have the same shape')
        if not np.all(self.contains(x, margin=self.delta / 2 * (1 + 1e-12))):
            raise ValueError('x is outside D_{delta/2}')
        if not np.all(np.abs(np.linalg.norm(v, axis=-1) - 1.) <= 1e-9):
            raise ValueError('v must be a unit vector')
        return self._chord(x, v)

    def _chord(self, x, v):
        w = x - self.center
        wv = np.sum(w * v, axis=-1, keepdims=True)
        c = np.sum(w * w, axis=-1, keepdims=True) - self.radius_Dd ** 2
        disc = np.sqrt(np.maximum(wv ** 2 - c, 0.))
        a = x + (-wv - disc) * v
        b = x + (-wv + disc) * v
        return a, b

    def line_of_response(self, a, b):
        """
        Direction and foot point of the line through (a, b).

        The foot point s is the orthogonal projection of a (relative to the center)
        on theta^perp, so s . theta = 0.
        """
        a = np.asarray(a, dtype='float64')
        b = np.asarray(b, dtype='float64')
        if not (np.all(self.on_surface(a)) and np.all(self.on_surface(b))):
            raise ValueError('endpoints must lie on the detector surface')
        diff = b - a
        length = np.linalg.norm(diff, axis=-1, keepdims=True)
        if np.any(length <= 1e-12 * self.radius_Dd):
            raise ValueError('coincident endpoints')
        theta = diff / length
        w = a - self.center
        s = w - np.sum(w * theta, axis=-1, keepdims=True) * theta
        return LineOfResponse(theta, s, a, b)

    def detection_density_factor(self, a, b):
        """
        Density g(a, b) of the pushforward of (uniform directions x line measure) onto
        pairs of detector points, for a sphere of radius R:

            g(a, b) = |b - a|^(3 - dim) / (4 R^2 |S^{dim-1}|)
        """
        a = np.asarray(a, dtype='float64')
        b = np.asarray(b, dtype='float64')
        length = np.linalg.norm(b - a, axis=-1)
        R = self.radius_Dd
        if self.dim == 2:
            return length / (8 * np.pi * R ** 2)
        else:
            return np.ones_like(length) / (16 * np.pi * R ** 2)

    def detection_density_sup(self):
        R = self.radius_Dd
        if self.dim == 2:
            return 1. / (4 * np.pi * R)
        else:
            return 1. / (16 * np.pi * R ** 2)


class LineOfResponse:
    """
    A line of response: unit direction theta, foot point s in theta^perp and
    the detector endpoints a, b.
    """
    def __init__(self, theta, s, a, b):
        self.theta = theta
        self.s = s
        self.a = a
        self.b = b

    def __repr__(self):
        return f'LineOfResponse(theta={self.theta}, s={self.s})'


def _spherical_to_cartesian(colat, lon):
    colat = np.asarray(colat, dtype='float64')
    lon = np.asarray(lon, dtype='float64')
    return np.stack([np.sin(colat) * np.cos(lon),
                     np.sin(colat) * np.sin(lon),
                     np.cos(colat) * np.ones_like(lon)], axis=-1)


def equal_area_zones(M):
    """
    Recursive zonal equal-area partition of the unit sphere into M cells.

    Two polar caps plus collars whose cell counts are rounded with carried discrepancy.
    The zone edges are placed so each zone has exactly count * 4 pi / M area.

    Returns
    -------
    zone_edges: np.array
        Colatitudes of the zone boundaries, from 0 to pi
    zone_counts: np.array
        Number of cells in each zone
    """
    area = 4 * np.pi / M
    cap_colat = np.arccos(1 - area / (2 * np.pi))
    ideal_angle = np.sqrt(area)
    n_collars = max(1, int(round((np.pi - 2 * cap_colat) / ideal_angle)))
    fitting_angle = (np.pi - 2 * cap_colat) / n_collars

    counts = [1]
    discrepancy = 0.
    for i in range(n_collars):
        top = cap_colat + i * fitting_angle
        bottom = cap_colat + (i + 1) * fitting_angle
        ideal = 2 * np.pi * (np.cos(top) - np.cos(bottom)) / area
        n = int(round(ideal + discrepancy))
        discrepancy += ideal - n
        counts.append(n)
    counts.append(1)
    counts[-2] += M - sum(counts)
    counts = np.array(counts, dtype='int64')
    assert np.all(counts > 0)

    cumulative = np.cumsum(counts)
    edges = np.zeros(counts.size + 1)
    edges[1:] = np.arccos(np.clip(1 - cumulative * area / (2 * np.pi), -1., 1.))
    edges[-1] = np.pi
    return edges, counts


def build_ring_geometry(dim, radius_D, radius_Dd, M, N, T, center=None):
    """
    Build the scanner geometry with delta = radius_Dd - radius_D and equal detector cells.

    >>> geom = build_ring_geometry(2, 0.8, 1.0, 8, 10, 1.0)
    """
    return ScannerGeometry(dim, radius_D, radius_Dd, M, N, T, center=center)
