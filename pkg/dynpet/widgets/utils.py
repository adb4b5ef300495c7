import matplotlib.pyplot as plt
import numpy as np


def get_particle_colors(num_particles, map_name='Dark2'):
    """
    One RGBA color per particle.
    """
    cmap = plt.get_cmap(map_name, max(num_particles, 1))
    return [cmap(i) for i in range(num_particles)]


def draw_domain(ax, geometry, with_detectors=True):
    """
    Circles of D and of the detector surface for 2D geometries.
    """
    theta = np.linspace(0, 2 * np.pi, 256)
    cx, cy = geometry.center[:2]
    ax.plot(cx + geometry.radius_D * np.cos(theta), cy + geometry.radius_D * np.sin(theta), color='0.5', lw=0.8)
    if with_detectors:
        ax.plot(cx + geometry.radius_Dd * np.cos(theta), cy + geometry.radius_Dd * np.sin(theta),
                color='k', lw=1.5)
    ax.set_aspect('equal')
