import json

import pytest

from dynpet.cli import ReconConfig, ConfigError, config_version
from dynpet.cli.commands import resolve_q_beta, estimate_total_mass
from dynpet.debias import heuristic_q


def test_defaults():
    config = ReconConfig()
    d = config.to_dict()
    assert d['version'] == config_version
    assert set(d.keys()) == {'version', 'geometry', 'model', 'truth', 'solver', 'sweep', 'toy', 'scaling', 'io'}
    assert config.model['mode'] == 'discrete'
    assert config.get_geometry().n_detectors == config.geometry['n_detectors']
    assert config.get_model().nx == config.model['nx']


def test_round_trip(tmp_path):
    partial = {'geometry': {'T': 2, 'n_bins': 5}, 'model': {'q': 'heuristic', 'beta': 'heuristic'},
               'solver': {'name': 'particles', 'params': {'refine_sweeps': 5}}}
    config = ReconConfig(partial)
    # integers given for floats are stored as floats
    assert config.geometry['T'] == 2. and isinstance(config.geometry['T'], float)

    d = config.to_dict()
    assert ReconConfig(d).to_dict() == d
    assert ReconConfig(json.loads(json.dumps(d))) == config

    file_path = config.to_json(tmp_path / 'config.json')
    config2 = ReconConfig.from_json(file_path)
    assert config2 == config
    assert config2.to_json(tmp_path / 'config2.json').read_text() == file_path.read_text()


def test_override():
    config = ReconConfig({'solver': {'seed': 3}})
    assert config.override().solver['seed'] == 3
    config2 = config.override(seed=7, n_jobs=2)
    assert config2.solver['seed'] == 7
    assert config2.solver['n_jobs'] == 2
    assert config.solver['seed'] == 3
    with pytest.raises(ConfigError):
        config.override(seed=-1)


@pytest.mark.parametrize('d, path', [
    ({'foo': {}}, 'foo'),
    ({'version': 2}, 'version'),
    ({'model': {'foo': 1}}, 'model.foo'),
    ({'model': {'p_s': 'a'}}, 'model.p_s'),
    ({'model': {'nx': True}}, 'model.nx'),
    ({'model': {'nx': 8.}}, 'model.nx'),
    ({'model': {'p_s': 0.}}, 'model.p_s'),
    ({'model': {'p_s': 0.6, 'p_d': 0.5}}, 'model.p_d'),
    ({'model': {'q': 0.}}, 'model.q'),
    ({'model': {'q': 'auto'}}, 'model.q'),
    ({'model': {'beta': -1.}}, 'model.beta'),
    ({'model': {'beta_table': 'beta.csv'}}, 'model.beta_table'),
    ({'model': {'mode': 'binned'}}, 'model.mode'),
    ({'model': {'mode': 'continuous', 'sigma': None}}, 'model.sigma'),
    ({'truth': {'mass': -1.}}, 'truth.mass'),
    ({'truth': {'kind': 'spiral'}}, 'truth.kind'),
    ({'solver': {'name': 'foo'}}, 'solver.name'),
    ({'solver': {'params': {'bad': 1}}}, 'solver.params.bad'),
    ({'solver': {'params': {'q': 2.}}}, 'solver.params.q'),
    ({'sweep': {'q_values': [1., 0.]}}, 'sweep.q_values'),
    ({'toy': {'m': 30}}, 'toy.m'),
    ({'scaling': {'theta': 0.}}, 'scaling.theta'),
    ({'geometry': {'radius_Dd': 0.5}}, 'geometry'),
    ({'geometry': []}, 'geometry'),
])
def test_config_errors(d, path):
    with pytest.raises(ConfigError) as err:
        ReconConfig(d)
    assert err.value.path == path
    assert str(err.value).startswith(path)


def test_config_file_errors(tmp_path):
    file_path = tmp_path / 'bad.json'
    file_path.write_text('{"model": ')
    with pytest.raises(ConfigError):
        ReconConfig.from_json(file_path)
    with pytest.raises(OSError):
        ReconConfig.from_json(tmp_path / 'missing.json')


def test_beta_table_with_heuristic():
    config = ReconConfig({'model': {'beta': 'heuristic', 'beta_table': 'beta.csv'}})
    assert config.model['beta_table'] == 'beta.csv'


def test_resolve_q_beta():
    config = ReconConfig({'model': {'q': 'heuristic', 'beta': 'heuristic'}})
    geometry = config.get_geometry()
    assert resolve_q_beta(config, geometry, 0) == (1., 1.)

    q, beta = resolve_q_beta(config, geometry, 100)
    total_mass = estimate_total_mass(config, 100)
    assert total_mass == pytest.approx(100 / 0.6)
    assert q == heuristic_q(geometry, 0.1, 0.5, total_mass, mode='discrete')
    # constant table: 1 / (T_half v^2)
    assert beta == pytest.approx(1 / 0.3 ** 2)

    config = ReconConfig({'model': {'q': 2., 'beta': 0.5}})
    assert resolve_q_beta(config, geometry, 100) == (2., 0.5)


if __name__ == '__main__':
    test_defaults()
    test_resolve_q_beta()
