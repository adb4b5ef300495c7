"""
Json configuration of the `dynpet` command line.

A config is a json document with a "version" key and the blocks geometry, model, truth,
solver, sweep, toy, scaling and io. Missing keys take their default, unknown keys are errors.
Serialization writes the fully defaulted document, so parsing it back gives the same config.
"""
from pathlib import Path
from copy import deepcopy
import json

from ..core import ScannerGeometry


config_version = 1

_heuristic = 'heuristic'

# block -> key -> (default, kind)
_config_schema = {
    'geometry': {
        'dim': (2, 'int'),
        'radius_D': (0.8, 'float'),
        'radius_Dd': (1., 'float'),
        'n_detectors': (16, 'int'),
        'n_bins': (10, 'int'),
        'T': (1., 'float'),
        'center': (None, 'float_list?'),
    },
    'model': {
        'p_s': (0.1, 'float'),
        'p_d': (0.5, 'float'),
        'q': (1., 'float_or_heuristic'),
        'beta': (0.1, 'float_or_heuristic'),
        'beta_table': (None, 'str?'),
        'beta_speed': (None, 'float?'),
        'beta_length': (None, 'float?'),
        'sigma': (0.025, 'float?'),
        'T_half': (1., 'float'),
        'mode': ('discrete', 'str'),
        'nx': (16, 'int'),
        'n_directions': (None, 'int?'),
        'subsample': (1, 'int'),
    },
    'truth': {
        'kind': ('linear', 'str'),
        'num_particles': (2, 'int'),
        'speed': (0.3, 'float'),
        'mass': (50., 'float'),
        'seed': (0, 'int'),
    },
    'solver': {
        'name': ('grid', 'str'),
        'seed': (0, 'int'),
        'n_jobs': (1, 'int'),
        'params': ({}, 'dict'),
    },
    'sweep': {
        'q_values': ([0., 0.01, 0.03, 0.1, 0.3, 1., 3., 10., 30., 100., 1000., 10000.], 'float_list'),
        'rtol': (1e-3, 'float'),
    },
    'toy': {
        'variant': ('continuous', 'str'),
        'p_s': (0.5, 'float'),
        'n': (20, 'int'),
        'm': (11, 'int'),
        'peak': (2., 'float'),
        'q_values': (None, 'float_list?'),
        'num_q': (41, 'int'),
    },
    'scaling': {
        'theta': (1., 'float'),
        'lam': (1., 'float'),
        'mu': (1., 'float'),
        'num_random': (0, 'int'),
        'random_low': (0.5, 'float'),
        'random_high': (2., 'float'),
        'num_pairs': (20, 'int'),
        'num_seeds': (10000, 'int'),
    },
    'io': {
        'listmode': ('listmode.csv', 'str'),
        'labels': ('labels.jsonl', 'str'),
        'ground_truth': ('ground_truth.json', 'str'),
        'geometry': ('geometry.json', 'str'),
    },
}

_choices = {
    'model.mode': ('discrete', 'continuous'),
    'truth.kind': ('static', 'linear', 'crossing'),
    'solver.name': ('grid', 'particles'),
    'toy.variant': ('continuous', 'discrete'),
}


class ConfigError(ValueError):
    """
    Invalid configuration, `path` is the dotted path of the faulty field (e.g. 'model.p_s').
    """
    def __init__(self, path, message):
        self.path = path
        self.message = message
        ValueError.__init__(self, f'{path}: {message}')


def _is_number(v):
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def _convert(path, value, kind):
    if kind.endswith('?'):
        if value is None:
            return None
        kind = kind[:-1]
    if kind == 'int':
        if not isinstance(value, int) or isinstance(value, bool):
            raise ConfigError(path, f'expected an integer, got {value!r}')
        return int(value)
    elif kind == 'float':
        if not _is_number(value):
            raise ConfigError(path, f'expected a number, got {value!r}')
        return float(value)
    elif kind == 'float_or_heuristic':
        if value == _heuristic:
            return value
        if not _is_number(value):
            raise ConfigError(path, f'expected a number or "{_heuristic}", got {value!r}')
        return float(value)
    elif kind == 'str':
        if not isinstance(value, str):
            raise ConfigError(path, f'expected a string, got {value!r}')
        return value
    elif kind == 'float_list':
        if not isinstance(value, list) or not all(_is_number(v) for v in value):
            raise ConfigError(path, f'expected a list of numbers, got {value!r}')
        return [float(v) for v in value]
    elif kind == 'dict':
        if not isinstance(value, dict):
            raise ConfigError(path, f'expected an object, got {value!r}')
        return deepcopy(value)
    raise ValueError(f'unknown kind {kind}')


class ReconConfig:
    """
    Validated command line configuration.

    Each block is a plain dict, available as an attribute (config.model['p_s']).

    Parameters
    ----------
    blocks: dict or None
        Partial or full config document, missing keys take their default
    """
    def __init__(self, blocks=None):
        blocks = deepcopy(blocks) if blocks is not None else {}
        if not isinstance(blocks, dict):
            raise ConfigError('<root>', 'the config must be a json object')
        version = blocks.pop('version', config_version)
        if version != config_version:
            raise ConfigError('version', f'unsupported version {version!r} (expected {config_version})')
        unknown = [k for k in blocks.keys() if k not in _config_schema]
        if len(unknown) > 0:
            raise ConfigError(unknown[0], 'unknown block')

        self._blocks = {}
        for block_name, schema in _config_schema.items():
            given = blocks.get(block_name, {})
            if not isinstance(given, dict):
                raise ConfigError(block_name, 'a block must be a json object')
            for k in given.keys():
                if k not in schema:
                    raise ConfigError(f'{block_name}.{k}', 'unknown key')
            block = {}
            for k, (default, kind) in schema.items():
                value = given[k] if k in given else deepcopy(default)
                block[k] = _convert(f'{block_name}.{k}', value, kind)
            self._blocks[block_name] = block
        self._check_invariants()

    def __getattr__(self, name):
        blocks = self.__dict__.get('_blocks', {})
        if name in blocks:
            return blocks[name]
        raise AttributeError(name)

    def __repr__(self):
        return f'ReconConfig: {self.model["mode"]} solver={self.solver["name"]}'

    def __eq__(self, other):
        return isinstance(other, ReconConfig) and self.to_dict() == other.to_dict()

    def _check_invariants(self):
        for path, choices in _choices.items():
            block_name, key = path.split('.')
            if self._blocks[block_name][key] not in choices:
                raise ConfigError(path, f'must be one of {choices}, got {self._blocks[block_name][key]!r}')

        model = self.model
        for k in ('p_s', 'p_d'):
            if not 0 < model[k] <= 1:
                raise ConfigError(f'model.{k}', f'must be in (0, 1], got {model[k]}')
        if model['p_s'] + model['p_d'] > 1:
            raise ConfigError('model.p_d', f'p_s + p_d must be <= 1, got {model["p_s"] + model["p_d"]}')
        for k in ('q', 'beta'):
            if model[k] != _heuristic and not model[k] > 0:
                raise ConfigError(f'model.{k}', f'must be positive, got {model[k]}')
        if model['beta_table'] is not None and model['beta'] != _heuristic:
            raise ConfigError('model.beta_table', f'a table is only used with beta = "{_heuristic}"')
        for k in ('beta_speed', 'beta_length', 'sigma'):
            if model[k] is not None and not model[k] > 0:
                raise ConfigError(f'model.{k}', f'must be positive, got {model[k]}')
        if model['mode'] == 'continuous' and model['sigma'] is None:
            raise ConfigError('model.sigma', 'continuous measurements need a positron range')
        if not model['T_half'] > 0:
            raise ConfigError('model.T_half', f'must be positive, got {model["T_half"]}')
        if model['nx'] < 2:
            raise ConfigError('model.nx', f'must be >= 2, got {model["nx"]}')

        truth = self.truth
        if truth['num_particles'] < 1:
            raise ConfigError('truth.num_particles', 'must be >= 1')
        if truth['mass'] < 0:
            raise ConfigError('truth.mass', f'must be nonnegative, got {truth["mass"]}')
        if truth['seed'] < 0 or self.solver['seed'] < 0:
            raise ConfigError('solver.seed' if self.solver['seed'] < 0 else 'truth.seed', 'seeds are unsigned')
        if self.solver['n_jobs'] == 0:
            raise ConfigError('solver.n_jobs', 'must be nonzero (-1 for all cores)')

        from ..solvers import get_default_params
        solver_defaults = get_default_params(self.solver['name'])
        for k in self.solver['params'].keys():
            if k not in solver_defaults or k in ('q', 'beta'):
                raise ConfigError(f'solver.params.{k}', f'not a parameter of the {self.solver["name"]} solver '
                                                       '(q and beta are set in the model block)')

        q_values = self.sweep['q_values']
        if len(q_values) == 0:
            raise ConfigError('sweep.q_values', 'empty sweep')
        if any(q < 0 for q in q_values) or any(b < a for a, b in zip(q_values[:-1], q_values[1:])):
            raise ConfigError('sweep.q_values', 'must be nonnegative and sorted')

        toy = self.toy
        if not 0 < toy['p_s'] < 1:
            raise ConfigError('toy.p_s', f'must be in (0, 1), got {toy["p_s"]}')
        if not 1 <= toy['m'] <= toy['n']:
            raise ConfigError('toy.m', f'need 1 <= m <= n, got m={toy["m"]} n={toy["n"]}')
        if toy['num_q'] < 2:
            raise ConfigError('toy.num_q', 'must be >= 2')

        scaling = self.scaling
        for k in ('theta', 'lam', 'mu', 'random_low', 'random_high'):
            if not scaling[k] > 0:
                raise ConfigError(f'scaling.{k}', f'must be positive, got {scaling[k]}')
        if scaling['random_high'] < scaling['random_low']:
            raise ConfigError('scaling.random_high', 'must be >= random_low')
        for k in ('num_random', 'num_seeds'):
            if scaling[k] < 0:
                raise ConfigError(f'scaling.{k}', 'must be nonnegative')
        if scaling['num_pairs'] < 1:
            raise ConfigError('scaling.num_pairs', 'must be >= 1')

        try:
            self.get_geometry()
        except ValueError as err:
            raise ConfigError('geometry', str(err))

    # io zone

    @classmethod
    def from_dict(cls, d):
        return cls(d)

    @classmethod
    def from_json(cls, file_path):
        file_path = Path(file_path)
        try:
            d = json.loads(file_path.read_text(encoding='utf8'))
        except json.JSONDecodeError as err:
            raise ConfigError('<root>', f'{file_path} is not valid json: {err}')
        return cls(d)

    def to_dict(self):
        d = {'version': config_version}
        d.update(deepcopy(self._blocks))
        return d

    def to_json(self, file_path):
        file_path = Path(file_path)
        file_path.parent.mkdir(parents=True, exist_ok=True)
        file_path.write_text(json.dumps(self.to_dict(), indent=4), encoding='utf8')
        return file_path

    def override(self, seed=None, n_jobs=None):
        """A copy with the command line overrides applied."""
        d = self.to_dict()
        if seed is not None:
            d['solver']['seed'] = int(seed)
        if n_jobs is not None:
            d['solver']['n_jobs'] = int(n_jobs)
        return ReconConfig(d)

    # builders

    def get_geometry(self):
        g = self.geometry
        return ScannerGeometry(g['dim'], g['radius_D'], g['radius_Dd'], g['n_detectors'], g['n_bins'], g['T'],
                               center=g['center'])

    def get_model(self, geometry=None):
        from ..forward import ForwardModel
        geometry = geometry if geometry is not None else self.get_geometry()
        m = self.model
        return ForwardModel(geometry, m['nx'], kernel=m['sigma'], p_s=m['p_s'], p_d=m['p_d'], T_half=m['T_half'],
                            mode=m['mode'], n_directions=m['n_directions'], subsample=m['subsample'],
                            n_jobs=self.solver['n_jobs'])

    def get_ground_truth(self, geometry=None):
        """None for a zero mass truth."""
        from ..listmode import toy_scene
        geometry = geometry if geometry is not None else self.get_geometry()
        t = self.truth
        if t['mass'] == 0:
            return None
        return toy_scene(geometry, kind=t['kind'], num_particles=t['num_particles'], speed=t['speed'],
                         mass=t['mass'], seed=t['seed'], T_half=self.model['T_half'])

    def resolve_path(self, key, folder):
        """io paths are relative to the output folder unless absolute."""
        p = Path(self.io[key])
        if p.is_absolute():
            return p
        return Path(folder) / p
