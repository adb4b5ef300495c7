import numpy as np
import scipy.special
import scipy.stats

from ..core import BaseDynpetObject


class PositronKernel(BaseDynpetObject):
    """
    Positron range kernel: isotropic Gaussian of width `sigma` truncated at
    `truncation` * sigma and renormalized to unit mass.

    sigma=None is the vanishing range (a Dirac), only usable with discrete measurements.

    Parameters
    ----------
    sigma: float or None
        Gaussian width
    dim: int
        Spatial dimension
    truncation: float
        Support radius in units of sigma
    """
    def __init__(self, sigma=None, dim=2, truncation=4.):
        BaseDynpetObject.__init__(self)
        if sigma is not None:
            sigma = float(sigma)
            if not sigma > 0:
                raise ValueError(f'sigma must be positive or None, got {sigma}')
        assert dim in (2, 3)
        self.sigma = sigma
        self.dim = int(dim)
        self.truncation = float(truncation)
        self._kwargs = dict(sigma=sigma, dim=self.dim, truncation=self.truncation)

    def __repr__(self):
        if self.is_dirac():
            return 'PositronKernel: none'
        return f'PositronKernel: sigma={self.sigma} truncated at {self.truncation} sigma'

    def is_dirac(self):
        return self.sigma is None

    @property
    def support_radius(self):
        if self.is_dirac():
            return 0.
        return self.truncation * self.sigma

    def _mass_fraction(self):
        # mass of the untruncated gaussian inside the support ball
        return scipy.stats.chi.cdf(self.truncation, df=self.dim)

    def check_support(self, delta):
        """
        The support must fit in the ball of radius delta / 2.
        """
        if self.support_radius > delta / 2 * (1 + 1e-12):
            raise ValueError(f'kernel support {self.support_radius:g} exceeds delta / 2 = {delta / 2:g}, '
                             f'sigma must be <= {delta / (2 * self.truncation):g}')

    def peak(self):
        """
        G(0) for the truncated renormalized kernel.
        """
        if self.is_dirac():
            raise ValueError('the vanishing kernel has no finite peak')
        return (2 * np.pi * self.sigma ** 2) ** (-self.dim / 2) / self._mass_fraction()

    def evaluate(self, x):
        """
        Kernel density at offsets x (shape (..., dim)).
        """
        x = np.asarray(x, dtype='float64')
        r2 = np.sum(x ** 2, axis=-1)
        values = self.peak() * np.exp(-r2 / (2 * self.sigma ** 2))
        return np.where(r2 > self.support_radius ** 2, 0., values)

    def stencil(self, h):
        """
        Discrete kernel on a grid of step h: integer offsets inside the support and
        normalized weights.

        Returns
        -------
        offsets: np.array (num, dim) int64
        weights: np.array (num, )
        """
        d = self.dim
        if self.is_dirac():
            return np.zeros((1, d), dtype='int64'), np.ones(1)
        r = int(np.floor(self.support_radius / h * (1 + 1e-9)))
        rng = np.arange(-r, r + 1)
        offsets = np.stack(np.meshgrid(*([rng] * d), indexing='ij'), axis=-1).reshape(-1, d)
        dist2 = np.sum((offsets * h) ** 2, axis=1)
        keep = dist2 <= (self.support_radius * (1 + 1e-9)) ** 2
        offsets = offsets[keep]
        weights = np.exp(-dist2[keep] / (2 * self.sigma ** 2))
        weights /= np.sum(weights)
        return offsets.astype('int64'), weights

    def stencil_radius(self, h):
        return int(np.max(np.abs(self.stencil(h)[0])))

    def sample_offsets(self, rng, num):
        """
        Draw positron displacements by rejection of the untruncated gaussian.
        """
        d = self.dim
        if self.is_dirac():
            return np.zeros((num, d))
        out = np.zeros((num, d))
        missing = np.arange(num)
        while missing.size > 0:
            x = rng.standard_normal((missing.size, d)) * self.sigma
            ok = np.sum(x ** 2, axis=1) <= self.support_radius ** 2
            out[missing[ok]] = x[ok]
            missing = missing[~ok]
        return out

    def line_integral(self, dist):
        """
        Integral of the untruncated gaussian along a line at distance `dist` from its center.
        """
        dist = np.asarray(dist, dtype='float64')
        s2 = self.sigma ** 2
        return (2 * np.pi * s2) ** (-(self.dim - 1) / 2) * np.exp(-dist ** 2 / (2 * s2))

    def truncated_line_integral(self, dist):
        """
        Integral of the truncated renormalized kernel along a line at distance `dist`.
        """
        dist = np.asarray(dist, dtype='float64')
        R2 = self.support_radius ** 2
        half_chord = np.sqrt(np.maximum(R2 - dist ** 2, 0.))
        factor = scipy.special.erf(half_chord / (self.sigma * np.sqrt(2))) / self._mass_fraction()
        return self.line_integral(dist) * factor

    def truncated_gradient_factor(self, dist):
        """
        d truncated_line_integral / d dist divided by dist, 0 outside the support.
        """
        dist = np.asarray(dist, dtype='float64')
        R2 = self.support_radius ** 2
        half_chord = np.sqrt(np.maximum(R2 - dist ** 2, 0.))
        inside = half_chord > 0
        c = half_chord / (self.sigma * np.sqrt(2))
        line = self.line_integral(dist)
        out = -line * scipy.special.erf(c) / self.sigma ** 2
        with np.errstate(divide='ignore', invalid='ignore'):
            # derivative of the erf factor through the half chord
            chord_term = -line * 2 / np.sqrt(np.pi) * np.exp(-c ** 2) / (self.sigma * np.sqrt(2) * half_chord)
        out = np.where(inside, out + chord_term, 0.)
        return out / self._mass_fraction()
