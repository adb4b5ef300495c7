import warnings

import numpy as np
import pandas as pd


class BetaTable:
    """
    Dimensionless regularization weight beta_hat as a function of the single scale free
    argument v T_half / (l ||rho_t||), tabulated and linearly interpolated.

    Parameters
    ----------
    arguments: array
        Strictly increasing knots
    values: array
        Positive beta_hat at the knots
    """
    def __init__(self, arguments, values):
        arguments = np.asarray(arguments, dtype='float64')
        values = np.asarray(values, dtype='float64')
        if arguments.ndim != 1 or arguments.shape != values.shape or arguments.size == 0:
            raise ValueError('arguments and values must be 1d arrays of the same nonzero size')
        if np.any(np.diff(arguments) <= 0):
            raise ValueError('table arguments must be strictly increasing')
        if np.any(values <= 0):
            raise ValueError('table values must be positive')
        self.arguments = arguments
        self.values = values

    def __repr__(self):
        return f'BetaTable: {self.arguments.size} knots on [{self.arguments[0]:g}, {self.arguments[-1]:g}]'

    @classmethod
    def constant(cls, value=1.):
        return cls([0.], [value])

    def __call__(self, x):
        x = float(x)
        lo, hi = self.arguments[0], self.arguments[-1]
        if self.arguments.size > 1 and not lo <= x <= hi:
            warnings.warn(f'beta table argument {x:g} outside [{lo:g}, {hi:g}], clamped')
        if self.arguments.size == 1:
            return float(self.values[0])
        return float(np.interp(x, self.arguments, self.values))

    def to_csv(self, file_path):
        pd.DataFrame(dict(argument=self.arguments, value=self.values)).to_csv(file_path, index=False)


def read_beta_table(file_path):
    """
    Two column CSV (argument, value).
    """
    df = pd.read_csv(file_path)
    missing = [c for c in ('argument', 'value') if c not in df.columns]
    if len(missing) > 0:
        raise ValueError(f'{file_path} misses the columns {missing}')
    df = df.sort_values('argument')
    return BetaTable(df['argument'].values, df['value'].values)


def beta_heuristic(speed, length, mass, T_half, table=None):
    """
    Transport weight from the typical speed v and length l of the motion and the slice mass:

        beta = beta_hat(v T_half / (l ||rho_t||)) / (T_half v^2)

    Parameters
    ----------
    speed: float
        Typical speed v
    length: float
        Typical length scale l
    mass: float
        Mass per unit time ||rho_t||
    T_half: float
    table: BetaTable or None
        beta_hat (constant 1 if None)

    Returns
    -------
    beta: float
    """
    for name, value in (('speed', speed), ('length', length), ('mass', mass), ('T_half', T_half)):
        if not value > 0:
            raise ValueError(f'{name} must be positive, got {value}')
    if table is None:
        table = BetaTable.constant()
    argument = speed * T_half / (length * mass)
    return table(argument) / (T_half * speed ** 2)
