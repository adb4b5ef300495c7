import numpy as np

from ..core import BaseTrajectories, GridMeasure, control_generator, sample_in_ball


class GroundTruth(BaseTrajectories):
    """
    Ground truth tracer distribution: particles of mass m_i (per unit time) moving
    along piecewise linear trajectories inside D.

    Parameters
    ----------
    geometry: ScannerGeometry
        The scanner
    masses: array
        Positive masses, shape (num_particles, )
    knots: array
        Shape (num_particles, N, dim), one knot per time bin center
    T_half: float
        Half life of the tracer
    """
    def __init__(self, geometry, masses, knots, T_half=1.):
        BaseTrajectories.__init__(self, geometry, masses, knots)
        if np.any(self.masses <= 0):
            raise ValueError('ground truth masses must be positive')
        if not T_half > 0:
            raise ValueError(f'T_half must be positive, got {T_half}')
        if not self.check_inside():
            raise ValueError('a ground truth trajectory exits D')
        self.T_half = float(T_half)
        self._kwargs['T_half'] = self.T_half

    def __repr__(self):
        return f'GroundTruth: {self.get_num_particles()} particles mass={self.total_mass():.6g} T_half={self.T_half}'


def _splat_weights(grid, x, splat):
    """
    Voxels and weights representing a unit mass at x, restricted to the masked voxels.
    """
    d = grid.dim
    if splat == 'nearest':
        corners = [np.floor((x - grid.origin) / grid.h).astype('int64')]
        weights = [1.]
    else:
        s = (x - grid.origin) / grid.h - 0.5
        i0 = np.floor(s).astype('int64')
        frac = s - i0
        corners, weights = [], []
        for bits in np.ndindex(*([2] * d)):
            bits = np.array(bits)
            corners.append(i0 + bits)
            weights.append(float(np.prod(np.where(bits == 1, frac, 1 - frac))))
    corners = np.array(corners)
    weights = np.array(weights)
    ok = np.all((corners >= 0) & (corners < grid.nx), axis=1)
    flat = np.ravel_multi_index(tuple(np.clip(corners, 0, grid.nx - 1).T), grid.shape)
    ok &= grid.mask.ravel()[flat]
    ok &= weights > 0
    if not np.any(ok):
        # closest masked voxel
        dist = np.linalg.norm(grid.centers[grid.mask_indices] - x, axis=1)
        return grid.mask_indices[[np.argmin(dist)]], np.ones(1)
    flat, weights = flat[ok], weights[ok]
    return flat, weights / np.sum(weights)


def ground_truth_to_grid(ground_truth, grid, splat='linear'):
    """
    Spacetime grid measure of a ground truth.

    Each particle deposits m_i * dT in every time bin at its knot (bin center) position,
    spread on the masked voxels by nearest or linear splatting. The flux on the faces
    between masked voxels is the knot velocity times the face mean of the particle's mass.

    The result is conservative (equal slice masses) but only approximately satisfies the
    discrete continuity equation, the splatting does not follow the discrete transport.

    Parameters
    ----------
    ground_truth: BaseTrajectories
        Ground truth or particle set
    grid: GridSpec
        Target grid
    splat: str
        'linear' (cloud in cell) or 'nearest'

    Returns
    -------
    grid_measure: GridMeasure
    """
    assert splat in ('linear', 'nearest'), "splat must be 'linear' or 'nearest'"
    geom = ground_truth.geometry
    if not ground_truth.check_inside():
        raise ValueError('a trajectory exits D')
    N, d = geom.n_bins, geom.dim
    dT = geom.bin_width
    rho = np.zeros((N, grid.num_voxels))
    eta = [np.zeros((N, int(np.prod(grid.face_shape(k))))) for k in range(d)]
    face_axis, face_pos, left, right = grid.get_mask_faces()

    velocities = ground_truth.knot_velocities()
    for i in range(ground_truth.get_num_particles()):
        m = ground_truth.masses[i]
        for t in range(N):
            flat, weights = _splat_weights(grid, ground_truth.knots[i, t], splat)
            local = np.zeros(grid.num_voxels)
            local[flat] = m * dT * weights
            rho[t] += local
            local_mask = local[grid.mask_indices]
            face_mean = 0.5 * (local_mask[left] + local_mask[right])
            for k in range(d):
                sel = face_axis == k
                eta[k][t, face_pos[sel]] += velocities[i, t, k] * face_mean[sel]

    rho = rho.reshape(grid.rho_shape())
    eta = [e.reshape((N, ) + grid.face_shape(k)) for k, e in enumerate(eta)]
    return GridMeasure(grid, rho, eta)


def toy_scene(geometry, kind='static', num_particles=1, speed=0.3, mass=1., seed=0, T_half=1.):
    """
    Small demo ground truths.

    * 'static': particles at rest, at random positions in the inner half of D (a single
      particle sits at the center)
    * 'linear': particles moving at constant velocity `speed` along random directions,
      centered at random positions
    * 'crossing': two particles crossing at the center along the two diagonals

    Parameters
    ----------
    geometry: ScannerGeometry
    kind: str
        'static', 'linear' or 'crossing'
    num_particles: int
        Number of particles (ignored for 'crossing')
    speed: float
        Speed of the moving particles
    mass: float or array
        Mass per unit time of each particle
    seed: int
        Seed of the control stream used for the random layout
    T_half: float
        Half life

    Returns
    -------
    ground_truth: GroundTruth
    """
    assert kind in ('static', 'linear', 'crossing'), f'unknown scene {kind}'
    rng = control_generator(seed)
    d, N = geometry.dim, geometry.n_bins
    t = geometry.bin_centers() - geometry.T / 2
    inner = 0.5 * geometry.radius_D

    if kind == 'crossing':
        num_particles = 2
    masses = np.broadcast_to(np.asarray(mass, dtype='float64'), (num_particles, )).copy()

    if kind == 'static':
        if num_particles == 1:
            positions = geometry.center[None, :].copy()
        else:
            positions = sample_in_ball(rng, num_particles, d, inner, center=geometry.center)
        knots = np.repeat(positions[:, None, :], N, axis=1)
    elif kind == 'linear':
        if num_particles == 1:
            positions = geometry.center[None, :].copy()
        else:
            positions = sample_in_ball(rng, num_particles, d, inner, center=geometry.center)
        directions = rng.standard_normal((num_particles, d))
        directions /= np.linalg.norm(directions, axis=1, keepdims=True)
        knots = positions[:, None, :] + speed * t[None, :, None] * directions[:, None, :]
    else:
        diag = np.zeros((2, d))
        diag[0, :2] = [1., 1.]
        diag[1, :2] = [-1., 1.]
        diag /= np.sqrt(2.)
        knots = geometry.center + speed * t[None, :, None] * diag[:, None, :]

    return GroundTruth(geometry, masses, knots, T_half=T_half)
