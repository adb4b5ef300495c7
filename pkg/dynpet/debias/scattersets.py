import time

import numpy as np
import pandas as pd

from ..core import GridMeasure, measure_to_mask_arrays, BaseTrajectories, divide_into_chunks, run_chunks
from ..forward import EventOperator
from ..objective import ParticleObjective
from ..solvers import run_solver


sweep_columns = ['q', 'N_s_lo', 'N_s_hi', 'minJ', 'runtime']


class ScatterSplit:
    """
    Events interpreted as scatter by a reconstruction: `under` where q times the scatter
    density strictly dominates the detection density, `over` where it dominates or ties.

    Parameters
    ----------
    under: np.array
        Event indices (listmode order)
    over: np.array
        Event indices (listmode order), a superset of under
    num_events: int
    q: float
    """
    def __init__(self, under, over, num_events, q):
        self.under = np.asarray(under, dtype='int64')
        self.over = np.asarray(over, dtype='int64')
        assert np.all(np.isin(self.under, self.over)), 'under must be a subset of over'
        self.num_events = int(num_events)
        self.q = float(q)

    def __repr__(self):
        return f'ScatterSplit: q={self.q:g} {self.num_under} <= N_s <= {self.num_over} of {self.num_events} events'

    @property
    def num_under(self):
        return int(self.under.size)

    @property
    def num_over(self):
        return int(self.over.size)

    def to_dict(self):
        return dict(q=self.q, num_events=self.num_events, under=self.under.tolist(), over=self.over.tolist())


def split_events(scatter, detection, q, rtol=0.):
    """
    Compare q * scatter against detection event by event.

    Parameters
    ----------
    scatter: np.array
        Scatter density at each event, without the q factor
    detection: np.array
        Detection density at each event
    q: float
    rtol: float
        Differences below rtol * max(q * scatter, detection) count as ties

    Returns
    -------
    under: np.array bool
        q * scatter > detection
    over: np.array bool
        q * scatter >= detection
    """
    scatter = np.asarray(scatter, dtype='float64')
    detection = np.asarray(detection, dtype='float64')
    diff = q * scatter - detection
    margin = rtol * np.maximum(q * scatter, detection)
    under = diff > margin
    over = diff >= -margin
    return under, over


def event_density_parts(result, listmode, model):
    """
    Scatter (without q) and detection densities at every event, in listmode order.

    Parameters
    ----------
    result: GridMeasure or BaseTrajectories
        A grid reconstruction or a particle set (continuous mode)
    """
    if len(listmode) == 0:
        return np.zeros(0), np.zeros(0)
    if isinstance(result, GridMeasure):
        if model.mode == 'discrete' and listmode.mode == 'continuous':
            raise ValueError('bin the listmode first, a discrete model drops same cell pairs')
        op = EventOperator(model, listmode, q=1.)
        rho_mask, _ = measure_to_mask_arrays(result)
        scatter = op.scatter_part(rho_mask)[op.event_to_row]
        detection = op.detection_part(rho_mask)[op.event_to_row]
    elif isinstance(result, BaseTrajectories):
        objective = ParticleObjective(listmode, model, q=1.)
        if result.get_num_particles() == 0:
            return np.zeros(len(listmode)), np.zeros(len(listmode))
        kernels = objective.kernels(result)
        scatter = objective.scatter_coef * np.full(len(listmode), np.sum(result.masses))
        detection = result.masses @ (kernels - objective.scatter_coef)
    else:
        raise ValueError(f'cannot compute scatter sets of {type(result)}')
    return scatter, detection


def scatter_sets(result, listmode, model, q, rtol=0.):
    """
    Minimal and maximal sets of events interpreted as scatter by a reconstruction.

    Parameters
    ----------
    result: GridMeasure or BaseTrajectories
    listmode: Listmode
    model: ForwardModel
    q: float
    rtol: float
        Relative tolerance on the comparison (0 is the exact definition)

    Returns
    -------
    split: ScatterSplit
    """
    if q < 0:
        raise ValueError(f'q must be nonnegative, got {q}')
    scatter, detection = event_density_parts(result, listmode, model)
    under, over = split_events(scatter, detection, q, rtol=rtol)
    return ScatterSplit(np.flatnonzero(under), np.flatnonzero(over), len(listmode), q)


def _sweep_chunk(start, stop, q_values, listmode, model, solver_name, rtol, solver_params):
    rows = []
    for q in q_values[start:stop]:
        if q == 0:
            # no event is strictly dominated by a zero scatter density
            rows.append(dict(q=0., N_s_lo=0, N_s_hi=0, minJ=np.nan, runtime=0.))
            continue
        t0 = time.perf_counter()
        reconstruction = run_solver(solver_name, listmode, model, q=float(q), **solver_params)
        runtime = time.perf_counter() - t0
        split = scatter_sets(reconstruction.result, listmode, model, q, rtol=rtol)
        rows.append(dict(q=float(q), N_s_lo=split.num_under, N_s_hi=split.num_over,
                         minJ=reconstruction.value.total, runtime=runtime))
    return rows


def count_scatter_curve(listmode, model, q_values, solver_name='grid', rtol=1e-3, n_jobs=1,
                        progress_bar=False, **solver_params):
    """
    Number of events interpreted as scatter along a list of q, one reconstruction per q.

    Parameters
    ----------
    listmode: Listmode
    model: ForwardModel
    q_values: list of float
        Sorted nonnegative values; q = 0 is reported without solving
    solver_name: str
        'grid' or 'particles'
    rtol: float
        Tie tolerance of the scatter comparison, to absorb the solver tolerance
    n_jobs: int
        Reconstructions run in parallel across q values
    progress_bar: bool
    **solver_params:
        Passed to the solver (q excluded)

    Returns
    -------
    curve: pd.DataFrame
        Columns q, N_s_lo, N_s_hi, minJ, runtime
    """
    q_values = np.asarray(q_values, dtype='float64')
    if np.any(q_values < 0):
        raise ValueError('q values must be nonnegative')
    if np.any(np.diff(q_values) < 0):
        raise ValueError('q values must be sorted')
    if 'q' in solver_params:
        raise ValueError('q is set by the sweep')
    chunks = divide_into_chunks(q_values.size, 1)
    returns = run_chunks(_sweep_chunk, chunks,
                         func_args=(q_values, listmode, model, solver_name, rtol, solver_params),
                         n_jobs=n_jobs, progress_bar=progress_bar, job_name='q sweep')
    rows = [row for r in returns for row in r]
    return pd.DataFrame(rows, columns=sweep_columns)


def read_sweep_csv(file_path):
    curve = pd.read_csv(file_path)
    missing = [c for c in sweep_columns if c not in curve.columns]
    if len(missing) > 0:
        raise ValueError(f'{file_path} misses the columns {missing}')
    return curve
