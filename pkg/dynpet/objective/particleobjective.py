"""
The reconstruction functional restricted to finitely many travelling Dirac masses.

For particles of mass c_i (per unit time) along piecewise linear curves gamma_i the event
density is linear in the masses:

    density(e) = sum_i c_i k_i(e)
    k_i(e) = q p_s / (H^2 T_half) + p_d g(a_e, b_e) l(dist(gamma_i(t_e), L_e)) / T_half

with l the line integral of the truncated positron kernel (the one of the sampler), and

    J = (p_s + p_d) T / T_half sum_i c_i - sum_e log(density(e)) + beta sum_i c_i int |gamma_i'|^2 dt
"""
import numpy as np

from .functionals import ObjectiveValue


class ParticleObjective:
    """
    Evaluate the particle functional, its gradient and the linearized insertion costs for
    one continuous listmode.

    Parameters
    ----------
    listmode: Listmode
        Continuous events
    model: ForwardModel
        Continuous forward model (gives p_s, p_d, T_half and the kernel)
    q: float
        Debiasing parameter
    beta: float
        Transport weight
    """
    def __init__(self, listmode, model, q=1., beta=1.):
        if model.mode != 'continuous' or listmode.mode != 'continuous':
            raise ValueError('the particle functional needs continuous events and a continuous model')
        if not listmode.geometry.is_same(model.geometry):
            raise ValueError('listmode and model geometries differ')
        if q < 0:
            raise ValueError(f'q must be nonnegative, got {q}')
        self.listmode = listmode
        self.model = model
        self.geometry = model.geometry
        self.kernel = model.kernel
        self.q = float(q)
        self.beta = float(beta)

        geom = self.geometry
        ev = listmode.events
        self.num_events = len(listmode)
        self.times = ev['t']
        self.a = ev['a']
        diff = ev['b'] - ev['a']
        self.theta = diff / np.linalg.norm(diff, axis=1, keepdims=True) if self.num_events else diff
        self.slice_index = geom.time_bin_index(self.times)
        self.weights = np.ones(self.num_events)
        self.detection_coef = model.p_d * geom.detection_density_factor(ev['a'], ev['b']) / model.T_half
        self.scatter_coef = self.q * model.p_s / (geom.surface_measure ** 2 * model.T_half)
        self.mass_coef = model.intensity_rate * geom.T

    def __repr__(self):
        return f'ParticleObjective: {self.num_events} events q={self.q} beta={self.beta}'

    def perpendicular_offsets(self, positions, events=None):
        """
        Offsets from the lines of response to positions, positions (num, dim) or (num, num_events, dim).

        Returns
        -------
        r_perp: np.array (num, num_events, dim)
        """
        a, theta = self.a, self.theta
        if events is not None:
            a, theta = a[events], theta[events]
        if positions.ndim == 2:
            positions = positions[:, None, :]
        r = positions - a[None, :, :]
        return r - np.sum(r * theta[None, :, :], axis=2, keepdims=True) * theta[None, :, :]

    def event_positions(self, particles):
        """Positions of every particle at every event time, shape (num, num_events, dim)."""
        return particles.positions(self.times)

    def kernels(self, particles):
        """
        k_i(e) for every particle and event, shape (num, num_events).
        """
        r_perp = self.perpendicular_offsets(self.event_positions(particles))
        dist = np.linalg.norm(r_perp, axis=2)
        return self.scatter_coef + self.detection_coef[None, :] * self.kernel.truncated_line_integral(dist)

    def densities(self, particles):
        if particles.get_num_particles() == 0:
            return np.zeros(self.num_events)
        return particles.masses @ self.kernels(particles)

    def kinetic_energies(self, particles):
        return particles.kinetic_energy()

    def value(self, particles):
        """
        Returns
        -------
        value: ObjectiveValue
        """
        masses = particles.masses
        fidelity_mass = self.mass_coef * float(np.sum(masses))
        bb = self.beta * float(np.sum(masses * self.kinetic_energies(particles))) if masses.size else 0.
        neg_log = 0.
        if self.num_events > 0:
            density = self.densities(particles)
            if np.any(density <= 0):
                return ObjectiveValue(fidelity_mass, np.inf, bb, feasible=False)
            neg_log = -float(np.sum(self.weights * np.log(density)))
        return ObjectiveValue(fidelity_mass, neg_log, bb)

    def mass_gradient(self, particles, kernels=None, density=None):
        """
        dJ / dc_i and d^2 J / dc_i^2 for every particle.
        """
        if kernels is None:
            kernels = self.kernels(particles)
        if density is None:
            density = particles.masses @ kernels
        ratio = kernels * (self.weights / density)[None, :]
        grad = self.mass_coef + self.beta * self.kinetic_energies(particles) - np.sum(ratio, axis=1)
        hess = np.sum(ratio ** 2 / self.weights[None, :], axis=1)
        return grad, hess

    def knot_gradient(self, particles):
        """
        dJ / d knots, same shape as particles.knots.
        """
        grad = self.beta * particles.masses[:, None, None] * particles.kinetic_energy_gradient()
        if self.num_events == 0 or particles.get_num_particles() == 0:
            return grad
        r_perp = self.perpendicular_offsets(self.event_positions(particles))
        dist = np.linalg.norm(r_perp, axis=2)
        kern = self.scatter_coef + self.detection_coef[None, :] * self.kernel.truncated_line_integral(dist)
        density = particles.masses @ kern
        # d density / d position of particle i at event e
        factor = self.detection_coef[None, :] * self.kernel.truncated_gradient_factor(dist)
        factor *= particles.masses[:, None] * (self.weights / density)[None, :]
        dpos = -factor[:, :, None] * r_perp

        i0, i1, w0, w1 = particles.interpolation_weights(self.times)
        for i in range(particles.get_num_particles()):
            np.add.at(grad[i], i0, w0[:, None] * dpos[i])
            np.add.at(grad[i], i1, w1[:, None] * dpos[i])
        return grad

    def uniform_density(self, mass):
        """
        Density at every event of a static uniform distribution of `mass` per unit time on D.
        Used as the reference density when there is no particle yet.
        """
        geom = self.geometry
        w = self.a - geom.center
        foot = w - np.sum(w * self.theta, axis=1, keepdims=True) * self.theta
        dist2 = np.sum(foot ** 2, axis=1)
        chord = 2 * np.sqrt(np.maximum(geom.radius_D ** 2 - dist2, 0.))
        if geom.dim == 2:
            volume = np.pi * geom.radius_D ** 2
        else:
            volume = 4. / 3. * np.pi * geom.radius_D ** 3
        return mass * (self.scatter_coef + self.detection_coef * chord / volume)

    def node_costs(self, positions, current_density):
        """
        Linearized cost of adding unit mass at `positions` during each time bin.

        cost[t, u] = (p_s + p_d) dT / T_half - sum_{e in bin t} k_u(e) / density(e)

        Parameters
        ----------
        positions: np.array (num, dim)
            Candidate positions
        current_density: np.array (num_events, )
            Density of the current iterate at each event

        Returns
        -------
        cost: np.array (N, num)
        """
        geom = self.geometry
        N = geom.n_bins
        cost = np.full((N, positions.shape[0]), self.mass_coef / N)
        for t in range(N):
            events = np.flatnonzero(self.slice_index == t)
            if events.size == 0:
                continue
            r_perp = self.perpendicular_offsets(positions, events)
            kern = self.scatter_coef + self.detection_coef[events][None, :] * \
                self.kernel.truncated_line_integral(np.linalg.norm(r_perp, axis=2))
            cost[t] -= kern @ (self.weights[events] / current_density[events])
        return cost


def evaluate_particle_J(particles, listmode, model, q=1., beta=1.):
    """
    The reconstruction functional at sum_i c_i (dt x delta_{gamma_i(t)}).

    The data term uses the gaussian line integral at the distance between the particle and
    the line of response at the event time. An empty particle set has zero density
    everywhere, its value is +inf as soon as there is an event.

    Parameters
    ----------
    particles: BaseTrajectories
        Particle set or ground truth
    listmode: Listmode
        Continuous events
    model: ForwardModel
        Continuous model
    q: float
    beta: float

    Returns
    -------
    value: ObjectiveValue
    """
    return ParticleObjective(listmode, model, q=q, beta=beta).value(particles)
