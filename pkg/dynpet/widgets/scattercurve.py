import numpy as np

from .basewidget import BaseWidget


class ScatterCountCurveWidget(BaseWidget):
    """
    Plots the number of events interpreted as scatter against q: the band between the
    strict (N_s_lo) and non strict (N_s_hi) counts, and the achieved minimum on a twin axis.

    Parameters
    ----------
    curve: pd.DataFrame
        Output of count_scatter_curve (columns q, N_s_lo, N_s_hi, minJ)
    num_events: int or None
        Draws the |E| level
    with_minimum: bool
        Also plot minJ
    log_q: bool
        Log scale for q (the q = 0 row is left out)
    figure: matplotlib figure
        The figure to be used. If not given a figure is created
    ax: matplotlib axis
        The axis to be used. If not given an axis is created

    Returns
    -------
    W: ScatterCountCurveWidget
        The output widget
    """
    def __init__(self, curve, num_events=None, with_minimum=True, log_q=True, figure=None, ax=None):
        BaseWidget.__init__(self, figure, ax)
        self.curve = curve
        self.num_events = num_events
        self.with_minimum = with_minimum
        self.log_q = log_q
        self.name = 'ScatterCountCurve'

    def plot(self):
        curve = self.curve
        if self.log_q:
            curve = curve[curve['q'] > 0]
        q = curve['q'].values
        self.ax.fill_between(q, curve['N_s_lo'].values, curve['N_s_hi'].values, step='post', color='C0', alpha=0.3)
        self.ax.step(q, curve['N_s_lo'].values, where='post', color='C0', label='N_s strict')
        self.ax.step(q, curve['N_s_hi'].values, where='post', color='C0', ls='--', label='N_s')
        if self.num_events is not None:
            self.ax.axhline(self.num_events, color='k', lw=0.8, ls=':')
        if self.log_q:
            self.ax.set_xscale('log')
        self.ax.set_xlabel('q')
        self.ax.set_ylabel('scatter events')
        self.ax.legend(loc='upper left')

        if self.with_minimum:
            minJ = curve['minJ'].values
            keep = np.isfinite(minJ)
            ax2 = self.ax.twinx()
            ax2.plot(q[keep], minJ[keep], color='C3', marker='.')
            ax2.set_ylabel('min J', color='C3')
            self.twin_ax = ax2


def plot_scatter_count_curve(*args, **kwargs):
    W = ScatterCountCurveWidget(*args, **kwargs)
    W.plot()
    return W
plot_scatter_count_curve.__doc__ = ScatterCountCurveWidget.__doc__
