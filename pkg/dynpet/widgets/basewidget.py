import matplotlib.pyplot as plt
from matplotlib import gridspec
import numpy as np


class BaseWidget:
    def __init__(self, figure=None, ax=None):
        if ax is not None:
            self.figure = ax.get_figure()
            self.ax = ax
        else:
            self.figure = figure if figure is not None else plt.figure()
            self.ax = self.figure.add_subplot(111)
        self.name = None

    def get_figure(self):
        return self.figure

    def get_ax(self):
        return self.ax

    def get_name(self):
        return self.name

    def save(self, file_path, **savefig_kwargs):
        """The format follows the suffix (the command line tools write svg)."""
        self.figure.savefig(file_path, **savefig_kwargs)


class BaseMultiWidget(BaseWidget):
    """
    A widget made of tiles: either sub axes laid out inside `ax` or user given `axes`.
    """
    def __init__(self, figure=None, ax=None, axes=None):
        self._gs = None
        self.axes = []
        if axes is not None:
            self.axes = np.array(axes)
            assert self.axes.ndim in (1, 2), "'axes' can be a 1-d array or list or a 2d array of axis"
            self.figure = self.axes.flat[0].get_figure()
            self.ax = None
            self._use_gs = False
        else:
            BaseWidget.__init__(self, figure, ax)
            self.ax.axis('off')
            self._use_gs = True
        self.name = None

    def get_tiled_ax(self, i, nrows, ncols, hspace=0.3, wspace=0.3):
        if not self._use_gs:
            flat = self.axes.reshape(-1)
            assert i < flat.size, f'{i} exceeds the number of available axis'
            return flat[i]
        if self._gs is None:
            self._gs = gridspec.GridSpecFromSubplotSpec(int(nrows), int(ncols), subplot_spec=self.ax.get_subplotspec(),
                                                        hspace=hspace, wspace=wspace)
        ax = self.figure.add_subplot(self._gs[int(i // ncols), int(i % ncols)])
        self.axes.append(ax)
        return ax
