from pathlib import Path
import json
import re

import numpy as np
import pandas as pd


_header_regex = re.compile(r'^# dynpet-listmode v1 mode=(?P<mode>[cd]) T=(?P<T>\S+) M=(?P<M>\d+) N=(?P<N>\d+)'
                           r'(?: seed=(?P<seed>\d+))?\s*$')


class ListmodeFormatError(ValueError):
    """A listmode or sidecar file that cannot be read, the message names the file line."""
    pass


def continuous_dtype(dim):
    return np.dtype([('t', 'float64'), ('a', 'float64', (dim, )), ('b', 'float64', (dim, ))])


discrete_dtype = np.dtype([('i', 'int64'), ('j', 'int64'), ('k', 'int64')])


label_dtype = np.dtype([('scattered', 'bool'), ('particle', 'int64')])


def find_invalid_events(events, geometry, mode):
    """
    Indices of events violating the range invariants (time outside [0, T], endpoints off the
    detector surface or coincident, bin indices out of range or j = k).
    """
    if events.size == 0:
        return np.zeros(0, dtype='int64')
    if mode == 'continuous':
        t = events['t']
        bad = ~np.isfinite(t) | (t < 0) | (t > geometry.T)
        bad |= ~geometry.on_surface(events['a']) | ~geometry.on_surface(events['b'])
        dist = np.linalg.norm(events['b'] - events['a'], axis=1)
        bad |= dist <= 1e-12 * geometry.radius_Dd
    else:
        N, M = geometry.n_bins, geometry.n_detectors
        i, j, k = events['i'], events['j'], events['k']
        bad = (i < 0) | (i >= N) | (j < 0) | (j >= M) | (k < 0) | (k >= M) | (j == k)
    return np.flatnonzero(bad)


def canonical_order(events, mode):
    """
    Sort order of events: by time then endpoints (continuous), by bin indices (discrete).
    """
    if events.size == 0:
        return np.zeros(0, dtype='int64')
    if mode == 'continuous':
        keys = [events['b'][:, k] for k in reversed(range(events['b'].shape[1]))]
        keys += [events['a'][:, k] for k in reversed(range(events['a'].shape[1]))]
        keys += [events['t']]
    else:
        keys = [events['k'], events['j'], events['i']]
    return np.lexsort(keys)


class Listmode:
    """
    A finite list of detected photon pairs E.

    Continuous events are (t, a, b) with a, b on the detector surface, discrete events are
    bin indices (i, j, k) = (time bin, detector cell of a, detector cell of b).
    Events are kept in canonical order (sorted by time first) so the list does not
    depend on the order it was given in.

    Parameters
    ----------
    events: np.array
        Structured array with continuous_dtype(dim) or discrete_dtype
    geometry: ScannerGeometry
        The scanner
    mode: str
        'continuous' or 'discrete'
    seed: int or None
        Seed of the simulation that produced the list (provenance only)
    """
    def __init__(self, events, geometry, mode='continuous', seed=None):
        assert mode in ('continuous', 'discrete'), "mode must be 'continuous' or 'discrete'"
        self.geometry = geometry
        self.mode = mode
        self.seed = seed
        expected = continuous_dtype(geometry.dim) if mode == 'continuous' else discrete_dtype
        if events is None:
            events = np.zeros(0, dtype=expected)
        events = np.asarray(events)
        if events.dtype != expected:
            raise ValueError(f'events dtype {events.dtype} is not {expected}')
        bad = find_invalid_events(events, geometry, mode)
        if bad.size > 0:
            raise ValueError(f'invalid event at index {bad[0]}')
        self.events = events[canonical_order(events, mode)]

    def __repr__(self):
        return f'Listmode: {len(self)} {self.mode} events {self.geometry}'

    def __len__(self):
        return self.events.size

    def get_times(self):
        if self.mode == 'continuous':
            return self.events['t']
        return (self.events['i'] + 0.5) * self.geometry.bin_width

    def get_slice_indices(self):
        if self.mode == 'continuous':
            return self.geometry.time_bin_index(self.events['t'])
        return self.events['i']

    def to_discrete(self, return_index=False):
        """
        Bin continuous events. Pairs falling in the same detector cell are dropped.

        Returns
        -------
        listmode: Listmode
            Discrete listmode
        index: np.array
            Only if return_index: for each discrete event, the index of its continuous event
        """
        if self.mode == 'discrete':
            index = np.arange(len(self))
            return (self, index) if return_index else self
        geom = self.geometry
        events = np.zeros(len(self), dtype=discrete_dtype)
        if len(self) > 0:
            events['i'] = geom.time_bin_index(self.events['t'])
            events['j'] = geom.detector_index(self.events['a'])
            events['k'] = geom.detector_index(self.events['b'])
        keep = np.flatnonzero(events['j'] != events['k'])
        events = events[keep]
        order = canonical_order(events, 'discrete')
        listmode = Listmode(events[order], geom, mode='discrete', seed=self.seed)
        if return_index:
            return listmode, keep[order]
        return listmode

    def select(self, indices):
        return Listmode(self.events[indices], self.geometry, mode=self.mode, seed=self.seed)


def _format_float(x):
    return repr(float(x))


def write_listmode(listmode, file_path):
    """
    Write a listmode csv file with a one line header, ending with seed=<seed> when the list
    comes from a simulation. Floats are written with their shortest exact representation so
    reading back is bit exact.
    """
    file_path = Path(file_path)
    file_path.parent.mkdir(parents=True, exist_ok=True)
    geom = listmode.geometry
    mode = 'c' if listmode.mode == 'continuous' else 'd'
    header = f'# dynpet-listmode v1 mode={mode} T={_format_float(geom.T)} M={geom.n_detectors} N={geom.n_bins}'
    if listmode.seed is not None:
        header += f' seed={int(listmode.seed)}'
    lines = [header]
    ev = listmode.events
    if listmode.mode == 'continuous':
        for e in ev:
            values = [e['t']] + list(e['a']) + list(e['b'])
            lines.append(','.join(_format_float(v) for v in values))
    else:
        for e in ev:
            lines.append(f"{int(e['i'])},{int(e['j'])},{int(e['k'])}")
    file_path.write_text('\n'.join(lines) + '\n', encoding='utf8')
    return file_path


def _find_bad_line(lines, num_columns, converter):
    for r, line in enumerate(lines):
        fields = line.strip().split(',')
        if len(fields) != num_columns:
            return r, f'expected {num_columns} columns, got {len(fields)}'
        try:
            [converter(f) for f in fields]
        except ValueError:
            return r, f'cannot parse {line.strip()!r}'
    return None, None


def read_listmode(file_path, geometry):
    """
    Read a listmode csv file written by write_listmode().

    Parameters
    ----------
    file_path: str or Path
        The csv file
    geometry: ScannerGeometry
        Geometry of the scanner, T, M and N must match the header

    Returns
    -------
    listmode: Listmode
    """
    file_path = Path(file_path)
    text = file_path.read_text(encoding='utf8')
    all_lines = text.splitlines()
    if len(all_lines) == 0:
        raise ListmodeFormatError(f'{file_path}: line 1: missing header')
    m = _header_regex.match(all_lines[0])
    if m is None:
        raise ListmodeFormatError(f'{file_path}: line 1: malformed header {all_lines[0]!r}')
    mode = 'continuous' if m.group('mode') == 'c' else 'discrete'
    T, M, N = float(m.group('T')), int(m.group('M')), int(m.group('N'))
    seed = int(m.group('seed')) if m.group('seed') is not None else None
    if T != geometry.T or M != geometry.n_detectors or N != geometry.n_bins:
        raise ListmodeFormatError(f'{file_path}: line 1: header (T={T}, M={M}, N={N}) does not match the geometry '
                                  f'(T={geometry.T}, M={geometry.n_detectors}, N={geometry.n_bins})')

    lines = all_lines[1:]
    while len(lines) > 0 and lines[-1].strip() == '':
        lines = lines[:-1]

    d = geometry.dim
    if mode == 'continuous':
        columns = ['t'] + [f'a{k}' for k in range(d)] + [f'b{k}' for k in range(d)]
        dtype, converter = 'float64', float
    else:
        columns = ['i', 'j', 'k']
        dtype, converter = 'int64', int

    if len(lines) == 0:
        return Listmode(None, geometry, mode=mode, seed=seed)

    df = None
    try:
        df = pd.read_csv(file_path, skiprows=1, header=None, names=columns, dtype=dtype,
                         float_precision='round_trip', skip_blank_lines=False)
        if df.shape[0] != len(lines) or df.isnull().values.any():
            df = None
    except (ValueError, pd.errors.ParserError):
        df = None
    if df is None:
        r, reason = _find_bad_line(lines, len(columns), converter)
        line_number = r + 2 if r is not None else 2
        raise ListmodeFormatError(f'{file_path}: line {line_number}: {reason}')

    if mode == 'continuous':
        events = np.zeros(len(df), dtype=continuous_dtype(d))
        events['t'] = df['t'].values
        events['a'] = df[[f'a{k}' for k in range(d)]].values
        events['b'] = df[[f'b{k}' for k in range(d)]].values
    else:
        events = np.zeros(len(df), dtype=discrete_dtype)
        for c in columns:
            events[c] = df[c].values

    bad = find_invalid_events(events, geometry, mode)
    if bad.size > 0:
        r = int(bad[0])
        raise ListmodeFormatError(f'{file_path}: line {r + 2}: event out of range ({lines[r].strip()})')
    return Listmode(events, geometry, mode=mode, seed=seed)


def write_hidden_labels(labels, file_path):
    """
    Sidecar diagnostic file: one json object per event, in listmode order.
    """
    file_path = Path(file_path)
    file_path.parent.mkdir(parents=True, exist_ok=True)
    with open(file_path, mode='w', encoding='utf8') as f:
        for i, lab in enumerate(labels):
            d = {'event': i, 'scattered': bool(lab['scattered']), 'particle': int(lab['particle'])}
            f.write(json.dumps(d) + '\n')
    return file_path


def read_hidden_labels(file_path):
    file_path = Path(file_path)
    rows = []
    with open(file_path, mode='r', encoding='utf8') as f:
        for n, line in enumerate(f):
            if line.strip() == '':
                continue
            try:
                d = json.loads(line)
                rows.append((n, int(d['event']), bool(d['scattered']), int(d['particle'])))
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as err:
                raise ListmodeFormatError(f'{file_path}: line {n + 1}: {err}')
    labels = np.zeros(len(rows), dtype=label_dtype)
    for r, (n, event, scattered, particle) in enumerate(rows):
        if event != r:
            raise ListmodeFormatError(f'{file_path}: line {n + 1}: expected event {r}, got {event}')
        labels[r] = (scattered, particle)
    return labels
