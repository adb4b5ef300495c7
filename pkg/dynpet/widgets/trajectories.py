import numpy as np

from .basewidget import BaseWidget
from .utils import get_particle_colors, draw_domain


class TrajectoryOverlayWidget(BaseWidget):
    """
    Plots reconstructed particle trajectories, optionally over the ground truth (dashed).
    Paths go through the knots, marker size grows with the particle mass. 3D trajectories
    are projected on the first two axes.

    Parameters
    ----------
    trajectories: ParticleSet or GroundTruth
        The trajectories to plot
    ground_truth: GroundTruth or None
        Drawn dashed in gray
    with_detectors: bool
        Draw the detector circle
    figure: matplotlib figure
        The figure to be used. If not given a figure is created
    ax: matplotlib axis
        The axis to be used. If not given an axis is created

    Returns
    -------
    W: TrajectoryOverlayWidget
        The output widget
    """
    def __init__(self, trajectories, ground_truth=None, with_detectors=True, figure=None, ax=None):
        BaseWidget.__init__(self, figure, ax)
        self.trajectories = trajectories
        self.ground_truth = ground_truth
        self.with_detectors = with_detectors
        self.name = 'TrajectoryOverlay'

    def plot(self):
        geometry = self.trajectories.geometry
        draw_domain(self.ax, geometry, with_detectors=self.with_detectors)

        if self.ground_truth is not None:
            for knots in self.ground_truth.knots:
                self.ax.plot(knots[:, 0], knots[:, 1], ls='--', color='0.4', lw=1)

        num = self.trajectories.get_num_particles()
        if num == 0:
            self.ax.set_title('no particle')
            return
        colors = get_particle_colors(num)
        masses = self.trajectories.masses
        sizes = 10 + 60 * masses / np.max(masses) if np.max(masses) > 0 else np.full(num, 10.)
        for i in range(num):
            knots = self.trajectories.knots[i]
            self.ax.plot(knots[:, 0], knots[:, 1], color=colors[i], lw=1.5)
            self.ax.scatter(knots[:, 0], knots[:, 1], s=sizes[i], color=colors[i])
            # start of the path
            self.ax.scatter(knots[:1, 0], knots[:1, 1], s=sizes[i], marker='x', color='k')
        self.ax.set_title(f'{num} particles')
        self.ax.set_xlabel('x')
        self.ax.set_ylabel('y')


def plot_trajectory_overlay(*args, **kwargs):
    W = TrajectoryOverlayWidget(*args, **kwargs)
    W.plot()
    return W
plot_trajectory_overlay.__doc__ = TrajectoryOverlayWidget.__doc__
