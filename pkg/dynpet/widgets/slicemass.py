import numpy as np

from .basewidget import BaseMultiWidget


class SliceMassWidget(BaseMultiWidget):
    """
    Plots the mass of each time slice of a grid measure as a heatmap (3D grids are summed
    along the last axis).

    Parameters
    ----------
    grid_measure: GridMeasure
        The reconstruction
    slices: list or None
        Time bins to show (all if None)
    ncols: int
        Number of tiles per row
    cmap: str
        Matplotlib colormap
    same_scale: bool
        One color range for all slices
    figure: matplotlib figure
        The figure to be used. If not given a figure is created
    ax: matplotlib axis
        The axis to be used. If not given an axis is created
    axes: list of matplotlib axes
        The axes to be used for the individual plots. If not given the required axes are created. If provided, the ax
        and figure parameters are ignored

    Returns
    -------
    W: SliceMassWidget
        The output widget
    """
    def __init__(self, grid_measure, slices=None, ncols=4, cmap='viridis', same_scale=True,
                 figure=None, ax=None, axes=None):
        BaseMultiWidget.__init__(self, figure, ax, axes)
        self.grid_measure = grid_measure
        if slices is None:
            slices = np.arange(grid_measure.grid.n_bins)
        self.slices = np.asarray(slices, dtype='int64')
        self.ncols = min(ncols, self.slices.size)
        self.cmap = cmap
        self.same_scale = same_scale
        self.name = 'SliceMass'

    def plot(self):
        grid = self.grid_measure.grid
        rho = self.grid_measure.rho
        if grid.dim == 3:
            rho = np.sum(rho, axis=-1)
        vmax = float(np.max(rho[self.slices])) if self.same_scale and self.slices.size > 0 else None
        if vmax is not None and vmax <= 0:
            vmax = None
        lo = grid.origin[:2]
        hi = lo + grid.nx * grid.h
        extent = (lo[0], hi[0], lo[1], hi[1])
        nrows = int(np.ceil(self.slices.size / self.ncols))
        dT = grid.geometry.bin_width
        for i, t in enumerate(self.slices):
            ax = self.get_tiled_ax(i, nrows, self.ncols)
            # rows of the image are the second axis
            ax.imshow(rho[t].T, origin='lower', extent=extent, cmap=self.cmap, vmin=0, vmax=vmax,
                      interpolation='nearest')
            ax.set_title(f't = {(t + 0.5) * dT:.3g}')
            ax.set_xticks([])
            ax.set_yticks([])


def plot_slice_mass(*args, **kwargs):
    W = SliceMassWidget(*args, **kwargs)
    W.plot()
    return W
plot_slice_mass.__doc__ = SliceMassWidget.__doc__
