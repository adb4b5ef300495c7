import numpy as np
import scipy.sparse


class GridSpec:
    """
    Regular voxel grid of the box circumscribing D_{delta/2}.

    The box has half width L = radius_D + delta / 2 and `nx` voxels per axis,
    voxel size h = 2 L / nx. Voxels whose center lies outside D are masked out.

    Parameters
    ----------
    geometry: ScannerGeometry
        The scanner geometry
    nx: int
        Number of voxels per spatial axis
    """
    def __init__(self, geometry, nx):
        if int(nx) != nx or nx < 2:
            raise ValueError(f'nx must be an integer >= 2, got {nx}')
        self.geometry = geometry
        self.nx = int(nx)
        self.dim = geometry.dim
        self.n_bins = geometry.n_bins
        self.half_width = geometry.radius_D + geometry.delta / 2
        self.h = 2 * self.half_width / self.nx
        self.voxel_volume = self.h ** self.dim
        self.origin = geometry.center - self.half_width
        self.shape = (self.nx, ) * self.dim
        self.num_voxels = self.nx ** self.dim

        axes = [self.origin[k] + (np.arange(self.nx) + 0.5) * self.h for k in range(self.dim)]
        centers = np.stack(np.meshgrid(*axes, indexing='ij'), axis=-1)
        self.centers = centers.reshape(-1, self.dim)
        dist = np.linalg.norm(self.centers - geometry.center[None, :], axis=1)
        self.mask = (dist <= geometry.radius_D * (1 + 1e-12)).reshape(self.shape)
        self.mask_indices = np.flatnonzero(self.mask)
        self.num_mask = self.mask_indices.size

        self._faces = None
        self._mask_faces = None

    def __repr__(self):
        return f'GridSpec: {self.dim}D nx={self.nx} h={self.h:.4g} masked voxels={self.num_mask}'

    def face_shape(self, axis):
        shape = list(self.shape)
        shape[axis] -= 1
        return tuple(shape)

    def rho_shape(self):
        return (self.n_bins, ) + self.shape

    def eta_shapes(self):
        return [(self.n_bins, ) + self.face_shape(k) for k in range(self.dim)]

    def voxel_index(self, points):
        """
        Flat index of the voxel containing each point (clipped to the box).
        """
        points = np.atleast_2d(np.asarray(points, dtype='float64'))
        ijk = np.floor((points - self.origin[None, :]) / self.h).astype('int64')
        ijk = np.clip(ijk, 0, self.nx - 1)
        return np.ravel_multi_index(tuple(ijk.T), self.shape)

    def get_faces(self):
        """
        Interior faces of the full box, per axis: (left flat voxel index, right flat voxel index).
        The face between u and u + e_k is stored at the multi index of u in face_shape(k).
        """
        if self._faces is None:
            faces = []
            full = np.arange(self.num_voxels).reshape(self.shape)
            for k in range(self.dim):
                left = np.take(full, np.arange(self.nx - 1), axis=k).ravel()
                right = np.take(full, np.arange(1, self.nx), axis=k).ravel()
                faces.append((left, right))
            self._faces = faces
        return self._faces

    def get_mask_faces(self):
        """
        Faces with both neighbours inside the mask, stacked over the axes.

        Returns
        -------
        face_axis: np.array
            Axis of each face
        face_pos: np.array
            Flat position of the face inside its axis face array
        left, right: np.array
            Position of the neighbours in the masked voxel numbering
        """
        if self._mask_faces is None:
            full_to_mask = -np.ones(self.num_voxels, dtype='int64')
            full_to_mask[self.mask_indices] = np.arange(self.num_mask)
            axis_list, pos_list, left_list, right_list = [], [], [], []
            for k, (left, right) in enumerate(self.get_faces()):
                keep = (full_to_mask[left] >= 0) & (full_to_mask[right] >= 0)
                pos = np.flatnonzero(keep)
                axis_list.append(np.full(pos.size, k, dtype='int64'))
                pos_list.append(pos)
                left_list.append(full_to_mask[left[pos]])
                right_list.append(full_to_mask[right[pos]])
            self._mask_faces = (np.concatenate(axis_list), np.concatenate(pos_list),
                                np.concatenate(left_list), np.concatenate(right_list))
        return self._mask_faces

    def get_mask_operators(self):
        """
        Sparse operators on the masked voxel numbering.

        Returns
        -------
        div: csr_matrix (num_mask, num_faces)
            Outflow of each voxel: +flux on the face to its right neighbour, -flux from the left one
        avg: csr_matrix (num_faces, num_mask)
            Two point mean of the voxels adjacent to each face
        """
        _, _, left, right = self.get_mask_faces()
        num_faces = left.size
        cols = np.arange(num_faces)
        div = scipy.sparse.coo_matrix(
            (np.concatenate([np.ones(num_faces), -np.ones(num_faces)]),
             (np.concatenate([left, right]), np.concatenate([cols, cols]))),
            shape=(self.num_mask, num_faces)).tocsr()
        avg = scipy.sparse.coo_matrix(
            (np.full(2 * num_faces, 0.5),
             (np.concatenate([cols, cols]), np.concatenate([left, right]))),
            shape=(num_faces, self.num_mask)).tocsr()
        return div, avg


class GridMeasure:
    """
    Discretized spacetime pair (rho, eta) on a staggered grid.

    rho[t] is the spacetime mass of time bin t in each voxel, so a particle of mass m
    deposits m * dT per bin and the total mass of a static particle over [0, T] is m * T.
    eta is a list of `dim` arrays, eta[k][t] the momentum on the interior faces
    orthogonal to axis k (same units as rho times a velocity).

    Parameters
    ----------
    grid: GridSpec
        The grid
    rho: np.array
        Shape (N, nx, ..., nx)
    eta: list of np.array or None
        Shapes (N, ) + grid.face_shape(k). None means zero flux.
    """
    def __init__(self, grid, rho, eta=None):
        self.grid = grid
        rho = np.asarray(rho, dtype='float64')
        if rho.shape != grid.rho_shape():
            raise ValueError(f'rho shape {rho.shape} do not match grid {grid.rho_shape()}')
        if eta is None:
            eta = [np.zeros(s) for s in grid.eta_shapes()]
        eta = [np.asarray(e, dtype='float64') for e in eta]
        if len(eta) != grid.dim:
            raise ValueError('eta must have one component per spatial axis')
        for e, s in zip(eta, grid.eta_shapes()):
            if e.shape != s:
                raise ValueError(f'eta shape {e.shape} do not match grid {s}')
        self.rho = rho
        self.eta = eta

    @classmethod
    def zeros(cls, grid):
        return cls(grid, np.zeros(grid.rho_shape()))

    @classmethod
    def uniform(cls, grid, total_mass):
        """
        Static conservative measure spread uniformly on the masked voxels.
        """
        rho = np.zeros(grid.rho_shape())
        flat = rho.reshape(grid.n_bins, -1)
        flat[:, grid.mask_indices] = total_mass / (grid.n_bins * grid.num_mask)
        return cls(grid, rho)

    def __repr__(self):
        return f'GridMeasure: mass={self.total_mass():.6g} on {self.grid}'

    def copy(self):
        return GridMeasure(self.grid, self.rho.copy(), [e.copy() for e in self.eta])

    def __add__(self, other):
        assert other.grid is self.grid or other.grid.rho_shape() == self.grid.rho_shape()
        return GridMeasure(self.grid, self.rho + other.rho, [e0 + e1 for e0, e1 in zip(self.eta, other.eta)])

    def __mul__(self, factor):
        factor = float(factor)
        return GridMeasure(self.grid, self.rho * factor, [e * factor for e in self.eta])

    __rmul__ = __mul__

    def total_mass(self):
        return float(np.sum(self.rho))

    def slice_masses(self):
        return np.sum(self.rho.reshape(self.grid.n_bins, -1), axis=1)

    def flux_norm(self):
        return float(sum(np.sum(np.abs(e)) for e in self.eta))

    def mass_outside_mask(self):
        flat = self.rho.reshape(self.grid.n_bins, -1)
        return float(np.sum(np.abs(flat[:, ~self.grid.mask.ravel()])))

    def is_conservative(self, rtol=1e-8):
        masses = self.slice_masses()
        scale = max(float(np.max(np.abs(masses))), 1e-300)
        return bool(np.max(np.abs(masses - masses[0])) <= rtol * scale)


def random_conservative_measure(grid, rng, total_mass=1., flux_scale=0.3, positivity_margin=0.5):
    """
    Random strictly positive measure on the mask satisfying the discrete continuity equation exactly.

    rho[0] is uniform random on the masked voxels, eta random on the mask internal faces,
    and the next slices follow by time stepping rho[t + 1] = rho[t] - dT / h * div(eta[t]).
    The flux of each slice is shrunk so that rho keeps `positivity_margin` of its value.

    Parameters
    ----------
    grid: GridSpec
    rng: np.random.Generator
    total_mass: float
        The mass ||rho||
    flux_scale: float
        Relative size of eta with respect to rho
    positivity_margin: float
        Fraction in (0, 1) of each voxel mass which can flow out in one step

    Returns
    -------
    grid_measure: GridMeasure
    """
    N = grid.n_bins
    c = grid.geometry.bin_width / grid.h
    div, avg = grid.get_mask_operators()
    face_axis, face_pos, _, _ = grid.get_mask_faces()
    num_faces = face_axis.size

    rho0 = rng.uniform(0.5, 1.5, size=grid.num_mask)
    rho0 *= total_mass / (N * np.sum(rho0))

    rho_mask = np.zeros((N, grid.num_mask))
    eta_mask = np.zeros((N, num_faces))
    rho_mask[0] = rho0
    for t in range(N):
        eta_t = flux_scale * (avg @ rho_mask[t]) * rng.uniform(-1., 1., size=num_faces)
        if t < N - 1:
            outflow = c * (div @ eta_t)
            ratio = np.abs(outflow) / (positivity_margin * rho_mask[t])
            factor = 1. / max(1., float(np.max(ratio)) if ratio.size else 1.)
            eta_t *= factor
            rho_mask[t + 1] = rho_mask[t] - c * (div @ eta_t)
        eta_mask[t] = eta_t

    return mask_arrays_to_measure(grid, rho_mask, eta_mask)


def mask_arrays_to_measure(grid, rho_mask, eta_mask):
    """
    Scatter arrays in the masked numbering (voxels and mask internal faces) into a GridMeasure.
    """
    N = grid.n_bins
    rho = np.zeros((N, grid.num_voxels))
    rho[:, grid.mask_indices] = rho_mask
    eta = [np.zeros((N, int(np.prod(grid.face_shape(k))))) for k in range(grid.dim)]
    face_axis, face_pos, _, _ = grid.get_mask_faces()
    for k in range(grid.dim):
        sel = face_axis == k
        eta[k][:, face_pos[sel]] = eta_mask[:, sel]
    eta = [e.reshape((N, ) + grid.face_shape(k)) for k, e in enumerate(eta)]
    return GridMeasure(grid, rho.reshape(grid.rho_shape()), eta)


def measure_to_mask_arrays(grid_measure):
    """
    Inverse of mask_arrays_to_measure (values outside the mask are dropped).
    """
    grid = grid_measure.grid
    N = grid.n_bins
    rho_mask = grid_measure.rho.reshape(N, -1)[:, grid.mask_indices]
    face_axis, face_pos, _, _ = grid.get_mask_faces()
    eta_mask = np.zeros((N, face_axis.size))
    for k in range(grid.dim):
        sel = face_axis == k
        eta_mask[:, sel] = grid_measure.eta[k].reshape(N, -1)[:, face_pos[sel]]
    return rho_mask, eta_mask
