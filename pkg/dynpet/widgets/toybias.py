from .basewidget import BaseWidget


class ToyBiasWidget(BaseWidget):
    """
    Plots the toy minimizer masses alpha (at the source) and beta (at each scattered event)
    against q, with the threshold q*.

    Parameters
    ----------
    table: pd.DataFrame
        Output of toy_bias_table (columns q, alpha, beta)
    q_star: float or None
        Vertical line at the threshold
    figure: matplotlib figure
        The figure to be used. If not given a figure is created
    ax: matplotlib axis
        The axis to be used. If not given an axis is created

    Returns
    -------
    W: ToyBiasWidget
        The output widget
    """
    def __init__(self, table, q_star=None, figure=None, ax=None):
        BaseWidget.__init__(self, figure, ax)
        self.table = table
        self.q_star = q_star
        self.name = 'ToyBias'

    def plot(self):
        q = self.table['q'].values
        self.ax.plot(q, self.table['beta'].values, color='C3', marker='.', label='beta')
        self.ax.set_xlabel('q')
        self.ax.set_ylabel('beta', color='C3')
        ax2 = self.ax.twinx()
        ax2.plot(q, self.table['alpha'].values, color='C0', marker='.', label='alpha')
        ax2.set_ylabel('alpha', color='C0')
        if self.q_star is not None:
            self.ax.axvline(self.q_star, color='k', ls='--', lw=0.8)
            self.ax.set_title(f'q* = {self.q_star:.4g}')
        self.twin_ax = ax2


def plot_toy_bias(*args, **kwargs):
    W = ToyBiasWidget(*args, **kwargs)
    W.plot()
    return W
plot_toy_bias.__doc__ = ToyBiasWidget.__doc__
