"""
Exhaustive solution of the scatter assignment problem at micro scale.

For a static single slice problem every subset E^s of the events gives a convex problem

    min_{rho >= 0}  alpha ||rho|| - sum_{e in E^s} log(p_s A^s rho)(e) - sum_{e not in E^s} log(p_d A^d rho)(e)

solved here for all subsets at once by multiplicative (ML-EM) updates, then polished with
L-BFGS-B. A duality bound certifies each value. The minimum of the max formulation with
parameter q is min over subsets of (value - |E^s| log q).
"""
import itertools

import numpy as np
import pandas as pd
import scipy.optimize

from ..forward import EventOperator
from .scattersets import split_events


class SubsetTable:
    """
    Minimum and minimizer of the assignment problem for every scatter subset.

    Parameters
    ----------
    subsets: np.array bool (num_subsets, num_events)
        True where the event is assigned to scatter
    values: np.array (num_subsets, )
        Minimum for each subset (inf when some detection row vanishes)
    rho: np.array (num_subsets, num_mask)
        Minimizers
    gaps: np.array (num_subsets, )
        Certified distance to the true minimum
    scatter: np.array (num_events, )
        Scatter density per unit mass
    detection: np.array (num_events, num_mask)
        Detection density rows
    alpha: float
        Mass coefficient
    """
    def __init__(self, subsets, values, rho, gaps, scatter, detection, alpha):
        self.subsets = subsets
        self.values = values
        self.rho = rho
        self.gaps = gaps
        self.scatter = scatter
        self.detection = detection
        self.alpha = float(alpha)

    def __repr__(self):
        return f'SubsetTable: {self.num_events} events {self.subsets.shape[0]} subsets'

    @property
    def num_events(self):
        return self.subsets.shape[1]

    def sizes(self):
        return np.sum(self.subsets, axis=1)

    def densities(self, rho):
        """Scatter (without q) and detection densities at every event for one rho."""
        return self.scatter * np.sum(rho), self.detection @ rho


def _subset_rows(subsets, scatter, detection):
    # (num_subsets, num_events, num_mask): scatter rows are constant in the voxels
    scatter_rows = np.broadcast_to(scatter[:, None], detection.shape)
    return np.where(subsets[:, :, None], scatter_rows[None], detection[None])


def _em_updates(P, alpha, num_iters):
    B, E, V = P.shape
    rho = np.full((B, V), E / (alpha * V))
    for _ in range(num_iters):
        z = np.einsum('bev,bv->be', P, rho)
        rho = rho * np.einsum('bev,be->bv', P, 1. / z) / alpha
    return rho


def _objective(rho, P, alpha):
    z = P @ rho
    if np.any(z <= 0):
        return np.inf
    return alpha * np.sum(rho) - np.sum(np.log(z))


def _duality_gap(rho, P, alpha):
    # y = 1 / (P rho) scaled into {P^T y <= alpha} gives a lower bound
    z = P @ rho
    c = np.max((P.T @ (1. / z)) / alpha)
    E = P.shape[0]
    return alpha * np.sum(rho) - E + E * np.log(c)


def _polish(rho, P, alpha):
    def fun(x):
        z = P @ x
        if np.any(z <= 0):
            return 1e300, np.zeros_like(x)
        return alpha * np.sum(x) - np.sum(np.log(z)), alpha - P.T @ (1. / z)

    res = scipy.optimize.minimize(fun, rho, jac=True, method='L-BFGS-B', bounds=[(0., None)] * rho.size,
                                  options=dict(ftol=1e-15, gtol=1e-12, maxiter=5000))
    x = res.x
    if np.sum(x) > 0:
        # the optimal mass along a ray is num_events / alpha
        x = x * P.shape[0] / (alpha * np.sum(x))
    if _objective(x, P, alpha) < _objective(rho, P, alpha):
        return x
    return rho


def scatter_subset_table(listmode, model, max_events=12, num_iters=3000, gap_tol=1e-10, polish=True):
    """
    Solve the assignment problem for every subset of the events.

    Parameters
    ----------
    listmode: Listmode
        At most max_events events
    model: ForwardModel
        Model on a geometry with a single time bin
    max_events: int
    num_iters: int
        Multiplicative updates (all subsets at once)
    gap_tol: float
        Subsets whose certified gap exceeds this are polished
    polish: bool

    Returns
    -------
    table: SubsetTable
    """
    if model.geometry.n_bins != 1:
        raise ValueError('the exhaustive assignment needs a static problem with one time bin')
    num_events = len(listmode)
    if num_events == 0:
        raise ValueError('no event')
    if num_events > max_events:
        raise ValueError(f'{num_events} events is too many for an exhaustive search (max {max_events})')
    if model.mode == 'discrete' and listmode.mode == 'continuous':
        listmode = listmode.to_discrete()
        num_events = len(listmode)

    op = EventOperator(model, listmode, q=1.)
    rows = op.event_to_row
    scatter = op.scatter_coef[rows]
    detection = op.detection.toarray()[rows]
    alpha = model.intensity_rate

    subsets = np.array(list(itertools.product([False, True], repeat=num_events)), dtype=bool)
    # an event assigned to detection needs a nonzero detection row
    feasible = ~np.any(~subsets & ~np.any(detection > 0, axis=1)[None, :], axis=1)
    if np.any(scatter <= 0):
        feasible &= ~np.any(subsets & (scatter <= 0)[None, :], axis=1)

    B, V = subsets.shape[0], detection.shape[1]
    rho = np.zeros((B, V))
    values = np.full(B, np.inf)
    gaps = np.full(B, np.inf)
    index = np.flatnonzero(feasible)
    if index.size > 0:
        P = _subset_rows(subsets[index], scatter, detection)
        rho[index] = _em_updates(P, alpha, num_iters)
        for n, b in enumerate(index):
            gap = _duality_gap(rho[b], P[n], alpha)
            if polish and gap > gap_tol:
                rho[b] = _polish(rho[b], P[n], alpha)
                gap = _duality_gap(rho[b], P[n], alpha)
            values[b] = _objective(rho[b], P[n], alpha)
            gaps[b] = gap
    return SubsetTable(subsets, values, rho, gaps, scatter, detection, alpha)


def combinatorial_minimum(table, num_scatter):
    """
    Minimum of the assignment problem under |E^s| = num_scatter.

    Returns
    -------
    value: float
    subset: np.array bool
    rho: np.array
    """
    candidates = np.flatnonzero(table.sizes() == num_scatter)
    if candidates.size == 0:
        raise ValueError(f'no subset with {num_scatter} events')
    best = candidates[np.argmin(table.values[candidates])]
    return float(table.values[best]), table.subsets[best], table.rho[best]


def max_formulation_value(table, rho, q):
    """alpha ||rho|| - sum_e log max(q scatter(e), detection(e))."""
    scatter, detection = table.densities(rho)
    top = np.maximum(q * scatter, detection)
    if np.any(top <= 0):
        return np.inf
    return float(table.alpha * np.sum(rho) - np.sum(np.log(top)))


def max_formulation_minimum(table, q):
    """
    Global minimum of the max formulation with parameter q > 0, through the subsets.

    Returns
    -------
    value: float
    subset: np.array bool
    rho: np.array
    """
    if not q > 0:
        raise ValueError(f'q must be positive, got {q}')
    shifted = table.values - table.sizes() * np.log(q)
    best = int(np.argmin(shifted))
    return float(shifted[best]), table.subsets[best], table.rho[best]


def check_equivalence(table, q, rtol=1e-6):
    """
    For the minimizer rho of the max formulation, every N_s between the sizes of its strict and
    non strict scatter sets should give a combinatorial minimum equal to J(rho) + N_s log q.

    Returns
    -------
    report: pd.DataFrame
        Columns N_s, combinatorial, q_formulation, deviation
    """
    _, _, rho = max_formulation_minimum(table, q)
    value = max_formulation_value(table, rho, q)
    scatter, detection = table.densities(rho)
    under, over = split_events(scatter, detection, q, rtol=rtol)
    rows = []
    for num_scatter in range(int(np.sum(under)), int(np.sum(over)) + 1):
        comb, _, _ = combinatorial_minimum(table, num_scatter)
        matched = value + num_scatter * np.log(q)
        rows.append(dict(N_s=num_scatter, combinatorial=comb, q_formulation=matched, deviation=abs(comb - matched)))
    return pd.DataFrame(rows, columns=['N_s', 'combinatorial', 'q_formulation', 'deviation'])
