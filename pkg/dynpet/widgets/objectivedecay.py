import numpy as np

from .basewidget import BaseWidget


def history_totals(history):
    """Iterations and objective totals of a solver history (list of dicts)."""
    iterations = np.array([h['iteration'] for h in history], dtype='float64')
    totals = []
    for h in history:
        if 'total' in h:
            totals.append(h['total'])
        else:
            totals.append(h['fidelity_mass'] + h['neg_log'] + h['bb'])
    return iterations, np.array(totals, dtype='float64')


class ObjectiveDecayWidget(BaseWidget):
    """
    Plots the objective along the solver iterations.

    Parameters
    ----------
    reconstruction: Reconstruction or list of dict
        A solver output or its diagnostics history
    relative: bool
        Plot J - min J (log scale) instead of J
    figure: matplotlib figure
        The figure to be used. If not given a figure is created
    ax: matplotlib axis
        The axis to be used. If not given an axis is created

    Returns
    -------
    W: ObjectiveDecayWidget
        The output widget
    """
    def __init__(self, reconstruction, relative=False, figure=None, ax=None):
        BaseWidget.__init__(self, figure, ax)
        if isinstance(reconstruction, list):
            history = reconstruction
        else:
            history = reconstruction.diagnostics.get('history', [])
        self.history = history
        self.relative = relative
        self.name = 'ObjectiveDecay'

    def plot(self):
        if len(self.history) == 0:
            self.ax.set_title('empty history')
            return
        iterations, totals = history_totals(self.history)
        finite = np.isfinite(totals)
        if self.relative and np.any(finite):
            excess = totals - np.min(totals[finite])
            keep = finite & (excess > 0)
            self.ax.semilogy(iterations[keep], excess[keep], marker='.', color='k')
            self.ax.set_ylabel('J - min J')
        else:
            self.ax.plot(iterations[finite], totals[finite], marker='.', color='k')
            self.ax.set_ylabel('J')
        self.ax.set_xlabel('iteration')


def plot_objective_decay(*args, **kwargs):
    W = ObjectiveDecayWidget(*args, **kwargs)
    W.plot()
    return W
plot_objective_decay.__doc__ = ObjectiveDecayWidget.__doc__
