import numpy as np

from .base import BaseDynpetObject


class BaseTrajectories(BaseDynpetObject):
    """
    Base class for weighted piecewise linear trajectories: particle i has mass m_i
    (mass per unit time) and one knot per time bin, placed at the bin center.

    Between two knots the position is linearly interpolated, on the two end half bins
    it is linearly extrapolated with the velocity of the first/last segment.

    Parameters
    ----------
    geometry: ScannerGeometry
        The scanner geometry (gives T and the bin layout)
    masses: array
        Shape (num_particles, )
    knots: array
        Shape (num_particles, N, dim)
    """
    def __init__(self, geometry, masses, knots):
        BaseDynpetObject.__init__(self)
        masses = np.asarray(masses, dtype='float64').reshape(-1)
        knots = np.asarray(knots, dtype='float64')
        N, d = geometry.n_bins, geometry.dim
        if masses.size == 0:
            knots = knots.reshape(0, N, d)
        if knots.shape != (masses.size, N, d):
            raise ValueError(f'knots must have shape ({masses.size}, {N}, {d}), got {knots.shape}')
        self.geometry = geometry
        self.masses = masses
        self.knots = knots
        self._kwargs = dict(geometry=geometry, masses=masses.tolist(), knots=knots.tolist())

    def get_num_particles(self):
        return self.masses.size

    def __len__(self):
        return self.get_num_particles()

    def mass_per_time(self):
        return float(np.sum(self.masses))

    def total_mass(self):
        """Spacetime mass sum_i m_i * T."""
        return self.mass_per_time() * self.geometry.T

    def interpolation_weights(self, t):
        """
        For times t, the two knot indices and weights such that
        position = w0 * knots[:, i0] + w1 * knots[:, i1].
        """
        geom = self.geometry
        N = geom.n_bins
        t = np.asarray(t, dtype='float64')
        if N == 1:
            zeros = np.zeros(t.shape, dtype='int64')
            return zeros, zeros, np.ones(t.shape), np.zeros(t.shape)
        s = t / geom.bin_width - 0.5
        i0 = np.clip(np.floor(s).astype('int64'), 0, N - 2)
        w1 = s - i0
        w0 = 1. - w1
        return i0, i0 + 1, w0, w1

    def positions(self, t):
        """
        Positions of all particles at times t.

        Returns
        -------
        positions: np.array
            Shape (num_particles, len(t), dim)
        """
        t = np.atleast_1d(np.asarray(t, dtype='float64'))
        i0, i1, w0, w1 = self.interpolation_weights(t)
        pos = self.knots[:, i0, :] * w0[None, :, None] + self.knots[:, i1, :] * w1[None, :, None]
        return pos

    def knot_velocities(self):
        """
        Central difference velocities at the knots (one sided at both ends).
        """
        N = self.geometry.n_bins
        if N == 1:
            return np.zeros_like(self.knots)
        return np.gradient(self.knots, self.geometry.bin_width, axis=1)

    def kinetic_energy(self):
        """
        int_0^T |gamma_i'|^2 dt for each particle, exact for the piecewise linear curve
        (the end half bins move with the end segment velocity).
        """
        N = self.geometry.n_bins
        if N == 1 or self.get_num_particles() == 0:
            return np.zeros(self.get_num_particles())
        dT = self.geometry.bin_width
        sq = np.sum(np.diff(self.knots, axis=1) ** 2, axis=2)
        weights = segment_energy_weights(N) / dT
        return sq @ weights

    def kinetic_energy_gradient(self):
        """
        Gradient of kinetic_energy() with respect to the knots, shape of knots.
        """
        N = self.geometry.n_bins
        grad = np.zeros_like(self.knots)
        if N == 1:
            return grad
        weights = segment_energy_weights(N) / self.geometry.bin_width
        diff = np.diff(self.knots, axis=1) * weights[None, :, None]
        grad[:, :-1, :] -= 2 * diff
        grad[:, 1:, :] += 2 * diff
        return grad

    def check_inside(self, tol=1e-9):
        r = np.linalg.norm(self.knots - self.geometry.center, axis=-1)
        return bool(np.all(r <= self.geometry.radius_D * (1 + tol)))


def segment_energy_weights(N):
    """
    Weight of |knot_{s+1} - knot_s|^2 / dT in the kinetic energy for each of the N - 1 segments:
    1 for inner segments plus 1/2 for each end half bin extrapolated with it.
    """
    weights = np.ones(N - 1)
    weights[0] += 0.5
    weights[-1] += 0.5
    return weights
