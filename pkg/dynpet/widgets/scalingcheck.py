import numpy as np

from .basewidget import BaseMultiWidget


class ScalingCheckWidget(BaseMultiWidget):
    """
    Plots the outcome of the scaling checks: the deviation |J - J_hat - |E| log kappa| of each
    random pair (one marker series per scale triple) and, if given, the per bin (i, j, k) z scores
    of the rescaled measurement law with the 3 sigma band.

    Parameters
    ----------
    functional_report: pd.DataFrame
        Concatenated functional_invariance outputs with a 'scale' column
    measurement_report: pd.DataFrame or None
        Concatenated measurement_invariance outputs with a 'scale' column
    figure: matplotlib figure
        The figure to be used. If not given a figure is created
    ax: matplotlib axis
        The axis to be used. If not given an axis is created
    axes: list of matplotlib axes
        The axes to be used for the individual plots. If not given the required axes are created. If provided, the ax
        and figure parameters are ignored

    Returns
    -------
    W: ScalingCheckWidget
        The output widget
    """
    def __init__(self, functional_report, measurement_report=None, figure=None, ax=None, axes=None):
        BaseMultiWidget.__init__(self, figure, ax, axes)
        self.functional_report = functional_report
        self.measurement_report = measurement_report
        self.name = 'ScalingCheck'

    def plot(self):
        with_measurement = self.measurement_report is not None and len(self.measurement_report) > 0
        ncols = 2 if with_measurement else 1

        ax = self.get_tiled_ax(0, 1, ncols)
        for s, df in self.functional_report.groupby('scale'):
            # exact zeros are drawn at the floor of the log axis
            deviation = np.maximum(df['deviation'].values, 1e-18)
            ax.semilogy(np.arange(deviation.size), deviation, ls='', marker='o', ms=3,
                        label=f'scale {s}')
        ax.set_xlabel('pair')
        ax.set_ylabel('|J - J_hat - |E| log kappa|')
        ax.legend(fontsize=7)

        if with_measurement:
            ax = self.get_tiled_ax(1, 1, ncols)
            for s, df in self.measurement_report.groupby('scale'):
                ax.plot(df['bin'].values, df['z'].values, ls='', marker='.', ms=3, label=f'scale {s}')
            ax.axhspan(-3, 3, color='k', alpha=0.1)
            ax.set_xlabel('bin (i, j, k)')
            ax.set_ylabel('z')


def plot_scaling_check(*args, **kwargs):
    W = ScalingCheckWidget(*args, **kwargs)
    W.plot()
    return W
plot_scaling_check.__doc__ = ScalingCheckWidget.__doc__
