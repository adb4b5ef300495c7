from pathlib import Path
import datetime
import hashlib
import json

import numpy as np


def check_json(d):
    # quick hack to ensure json writable
    for k, v in d.items():
        if isinstance(v, dict):
            d[k] = check_json(v)
        elif isinstance(v, Path):
            d[k] = str(v.absolute())
        elif isinstance(v, (bool, np.bool_)):
            d[k] = bool(v)
        elif isinstance(v, (np.int32, np.int64, np.uint32, np.uint64)):
            d[k] = int(v)
        elif isinstance(v, (np.float32, np.float64)):
            d[k] = float(v)
        elif isinstance(v, datetime.datetime):
            d[k] = v.isoformat()
        elif isinstance(v, tuple):
            d[k] = check_json({'_': list(v)})['_']
        elif isinstance(v, (np.ndarray, list)):
            if len(v) > 0:
                if isinstance(v[0], dict):
                    d[k] = [check_json(v_el) for v_el in v]
                else:
                    v_arr = np.array(v)
                    if 'int' in str(v_arr.dtype):
                        d[k] = v_arr.astype('int64').tolist()
                    elif 'float' in str(v_arr.dtype):
                        d[k] = v_arr.astype('float64').tolist()
                    elif 'bool' in str(v_arr.dtype):
                        d[k] = v_arr.astype(bool).tolist()
                    elif v_arr.ndim == 1 and isinstance(v_arr[0], str):
                        d[k] = [str(v_el) for v_el in v_arr]
                    else:
                        print(f'Skipping field {k}: only arrays of int, float, bool or str types can be serialized')
            else:
                d[k] = list(v)
    return d


def hash_dict(d):
    """
    Stable sha1 hex digest of a json serializable dict.
    """
    txt = json.dumps(check_json(dict(d)), sort_keys=True)
    return hashlib.sha1(txt.encode('utf8')).hexdigest()


def write_header_and_slab(file_path, header, arrays):
    """
    Write a json header line followed by the raw little-endian bytes of `arrays`.

    Parameters
    ----------
    file_path: str or Path
        Output file
    header: dict
        Json serializable header, written on the first line
    arrays: list of np.array
        Arrays already cast to their little-endian dtype ('<f8', '<u4', ...)
    """
    file_path = Path(file_path)
    file_path.parent.mkdir(parents=True, exist_ok=True)
    txt = json.dumps(check_json(dict(header)))
    assert '\n' not in txt
    with open(file_path, mode='wb') as f:
        f.write(txt.encode('utf8') + b'\n')
        for arr in arrays:
            f.write(np.ascontiguousarray(arr).tobytes())


def read_header_and_slab(file_path):
    """
    Read back a file written by write_header_and_slab.

    Returns
    -------
    header: dict
    raw: bytes
        Everything after the header line
    """
    file_path = Path(file_path)
    with open(file_path, mode='rb') as f:
        content = f.read()
    ind = content.find(b'\n')
    if ind < 0:
        raise ValueError(f'{file_path} has no header line')
    try:
        header = json.loads(content[:ind].decode('utf8'))
    except json.JSONDecodeError as err:
        raise ValueError(f'{file_path} has a malformed header: {err}')
    return header, content[ind + 1:]


def write_grid_measure(grid_measure, file_path):
    """
    Save a GridMeasure as a json header line + little-endian float64 slab (rho then eta components).
    """
    grid = grid_measure.grid
    header = {
        'format': 'dynpet-grid',
        'version': 1,
        'geometry': grid.geometry.to_dict(),
        'nx': grid.nx,
        'rho_shape': list(grid_measure.rho.shape),
        'eta_shapes': [list(e.shape) for e in grid_measure.eta],
        'dtype': '<f8',
    }
    arrays = [grid_measure.rho.astype('<f8')] + [e.astype('<f8') for e in grid_measure.eta]
    write_header_and_slab(file_path, header, arrays)


def read_grid_measure(file_path):
    from .base import BaseDynpetObject
    from .grid import GridSpec, GridMeasure

    header, raw = read_header_and_slab(file_path)
    if header.get('format') != 'dynpet-grid':
        raise ValueError(f'{file_path} is not a dynpet grid file')
    geometry = BaseDynpetObject.from_dict(header['geometry'])
    grid = GridSpec(geometry, header['nx'])

    shapes = [tuple(header['rho_shape'])] + [tuple(s) for s in header['eta_shapes']]
    sizes = [int(np.prod(s)) for s in shapes]
    values = np.frombuffer(raw, dtype='<f8')
    if values.size != sum(sizes):
        raise ValueError(f'{file_path}: slab size {values.size} do not match header {sum(sizes)}')
    arrays = []
    start = 0
    for shape, size in zip(shapes, sizes):
        arrays.append(values[start:start + size].reshape(shape).astype('float64'))
        start += size
    return GridMeasure(grid, arrays[0], arrays[1:])
