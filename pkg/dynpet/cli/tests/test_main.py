import json

import pytest
import numpy as np
import pandas as pd

from dynpet.cli import ReconConfig, main
from dynpet.listmode import GroundTruth, read_hidden_labels
from dynpet.solvers import GridSolver


def _small_config(**blocks):
    d = {
        'geometry': {'n_detectors': 8, 'n_bins': 4},
        'model': {'nx': 8, 'beta': 0.1},
        'truth': {'kind': 'static', 'num_particles': 1, 'mass': 30.},
        'solver': {'params': {'max_iters': 100}},
        'scaling': {'num_pairs': 3, 'num_seeds': 0},
    }
    for block, values in blocks.items():
        d.setdefault(block, {}).update(values)
    return d


def _write_config(tmp_path, d, name='input_config.json'):
    return str(ReconConfig(d).to_json(tmp_path / name))


def _read_json(file_path):
    with open(file_path, 'r') as f:
        return json.load(f)


def test_simulate(tmp_path):
    config_file = _write_config(tmp_path, _small_config())
    for name in ('run1', 'run2'):
        assert main(['simulate', '--config', config_file, '--out', str(tmp_path / name), '--threads', '1']) == 0

    run1, run2 = tmp_path / 'run1', tmp_path / 'run2'
    for file_name in ('listmode.csv', 'labels.jsonl', 'ground_truth.json', 'geometry.json', 'simulate_summary.json',
                      'config.json'):
        assert (run1 / file_name).is_file()
        # same seed: byte identical outputs
        assert (run1 / file_name).read_bytes() == (run2 / file_name).read_bytes()

    summary = _read_json(run1 / 'simulate_summary.json')
    labels = read_hidden_labels(run1 / 'labels.jsonl')
    assert summary['num_events'] == labels.size
    ground_truth = GroundTruth.load_from_json(run1 / 'ground_truth.json')
    assert ground_truth.get_annotation('sampler_seed') == 0
    assert ground_truth.get_annotation('kind') == 'static'
    assert summary['mode'] == 'discrete'
    assert np.isclose(summary['expected_num_events'], 30. * 0.6)

    # other seed
    assert main(['simulate', '--config', config_file, '--out', str(tmp_path / 'run3'), '--seed', '1']) == 0
    assert (tmp_path / 'run3' / 'listmode.csv').read_bytes() != (run1 / 'listmode.csv').read_bytes()


def test_simulate_zero_mass(tmp_path):
    config_file = _write_config(tmp_path, _small_config(truth={'mass': 0.}))
    assert main(['simulate', '--config', config_file, '--out', str(tmp_path / 'run')]) == 0
    assert _read_json(tmp_path / 'run' / 'simulate_summary.json')['num_events'] == 0
    lines = (tmp_path / 'run' / 'listmode.csv').read_text().splitlines()
    assert len(lines) == 1 and lines[0].startswith('# dynpet-listmode')

    # empty listmode: zero reconstruction
    assert main(['reconstruct', '--config', config_file, '--out', str(tmp_path / 'run')]) == 0
    report = _read_json(tmp_path / 'run' / 'report.json')
    assert report['num_events'] == 0
    assert report['objective']['feasible'] is True
    assert report['objective']['total'] == 0.
    assert report['all_pass'] is True


def test_simulate_scatter_fraction(tmp_path):
    p_s, p_d = 0.1, 0.5
    config_file = _write_config(tmp_path, _small_config(model={'mode': 'continuous', 'p_s': p_s, 'p_d': p_d},
                                                        truth={'mass': 1e4 / (p_s + p_d)}))
    assert main(['simulate', '--config', config_file, '--out', str(tmp_path / 'run')]) == 0
    summary = _read_json(tmp_path / 'run' / 'simulate_summary.json')
    n = summary['num_events']
    p = p_s / (p_s + p_d)
    assert abs(n - 1e4) <= 4 * np.sqrt(1e4)
    assert abs(summary['scatter_fraction'] - p) <= 3 * np.sqrt(p * (1 - p) / n)


def test_reconstruct_grid(tmp_path):
    config_file = _write_config(tmp_path, _small_config())
    out = tmp_path / 'run'
    assert main(['simulate', '--config', config_file, '--out', str(out)]) == 0
    assert main(['reconstruct', '--config', config_file, '--out', str(out)]) == 0

    report = _read_json(out / 'report.json')
    assert report['solver_name'] == 'grid'
    assert report['num_events'] > 0
    assert report['objective']['feasible'] is True
    assert report['all_pass'] is True
    assert {c['name'] for c in report['checks']} == {'feasible', 'nonnegative', 'continuity', 'slice_mass_spread',
                                                    'mass_outside_D'}
    for plot in ('slice_mass.svg', 'objective_decay.svg'):
        assert plot in report['plots']
        assert (out / plot).read_text().lstrip().startswith('<?xml')
    assert (out / 'reconstruction' / 'dynpet_log.json').is_file()
    assert (out / 'reconstruction' / 'grid_measure.bin').is_file()


def test_reconstruct_particles(tmp_path):
    d = _small_config(model={'mode': 'continuous', 'sigma': 0.025, 'nx': 9},
                      truth={'mass': 40. / 0.6}, solver={'name': 'particles', 'params': {'refine_sweeps': 5}})
    config_file = _write_config(tmp_path, d)
    out = tmp_path / 'run'
    assert main(['simulate', '--config', config_file, '--out', str(out)]) == 0
    assert main(['reconstruct', '--config', config_file, '--out', str(out)]) == 0
    report = _read_json(out / 'report.json')
    assert report['solver_name'] == 'particles'
    assert 'trajectories.svg' in report['plots']
    assert report['all_pass'] is True


def test_reconstruct_input_errors(tmp_path, capsys):
    config_file = _write_config(tmp_path, _small_config())
    out = tmp_path / 'run'
    assert main(['simulate', '--config', config_file, '--out', str(out)]) == 0

    # geometry mismatch
    other = _write_config(tmp_path, _small_config(geometry={'n_detectors': 12}), name='other.json')
    capsys.readouterr()
    assert main(['reconstruct', '--config', other, '--out', str(out)]) == 2
    assert 'geometry mismatch' in capsys.readouterr().err

    # corrupted row
    lines = (out / 'listmode.csv').read_text().splitlines()
    lines.append('1,2,oops')
    bad_file = tmp_path / 'bad' / 'listmode.csv'
    bad_file.parent.mkdir()
    bad_file.write_text('\n'.join(lines) + '\n')
    assert main(['reconstruct', '--config', config_file, '--out', str(out), '--listmode', str(bad_file)]) == 2
    assert f'line {len(lines)}' in capsys.readouterr().err

    # missing file
    assert main(['reconstruct', '--config', config_file, '--out', str(tmp_path / 'empty')]) == 2

    # unknown config key
    bad_config = tmp_path / 'bad_config.json'
    bad_config.write_text(json.dumps({'model': {'foo': 1}}))
    assert main(['simulate', '--config', str(bad_config), '--out', str(out)]) == 2
    assert 'model.foo' in capsys.readouterr().err

    with pytest.raises(SystemExit) as err:
        main(['unknown'])
    assert err.value.code == 2


def test_reconstruct_solver_failure(tmp_path, monkeypatch):
    config_file = _write_config(tmp_path, _small_config())
    out = tmp_path / 'run'
    assert main(['simulate', '--config', config_file, '--out', str(out)]) == 0

    def failing_run(cls, listmode, model, params, verbose):
        raise FloatingPointError('non finite iterate')

    monkeypatch.setattr(GridSolver, '_run', classmethod(failing_run))
    assert main(['reconstruct', '--config', config_file, '--out', str(out)]) == 1


def test_sweep_q(tmp_path):
    config_file = _write_config(tmp_path, _small_config(sweep={'q_values': [0., 1., 1e8]}))
    out = tmp_path / 'run'
    assert main(['simulate', '--config', config_file, '--out', str(out)]) == 0
    assert main(['sweep-q', '--config', config_file, '--out', str(out)]) == 0

    curve = pd.read_csv(out / 'sweep_q.csv')
    num_events = _read_json(out / 'simulate_summary.json')['num_events']
    assert list(curve['q']) == [0., 1., 1e8]
    assert curve['N_s_lo'].iloc[0] == 0
    assert curve['N_s_hi'].iloc[-1] == num_events
    assert (out / 'sweep_q.svg').is_file()
    summary = _read_json(out / 'sweep_q_summary.json')
    assert summary['monotone'] is True


def test_toy_bias(tmp_path):
    # default toy: p_s = 0.5, G0 = 2, m = 11
    assert main(['toy-bias', '--out', str(tmp_path / 'continuous')]) == 0
    table = pd.read_csv(tmp_path / 'continuous' / 'toy_bias.csv')
    above = table[table['q'] > 0.2 + 1e-9]
    below = table[table['q'] < 0.2 - 1e-9]
    assert len(above) > 0 and len(below) > 0
    assert np.all(above['beta'].values == 0.)
    assert np.all(below['beta'].values > 0.)
    summary = _read_json(tmp_path / 'continuous' / 'toy_bias_summary.json')
    assert summary['q_star'] == pytest.approx(0.2)
    assert summary['relative_error'] <= 1e-4
    assert (tmp_path / 'continuous' / 'toy_bias.svg').is_file()

    config_file = _write_config(tmp_path, {'toy': {'variant': 'discrete', 'peak': 20}})
    assert main(['toy-bias', '--config', config_file, '--out', str(tmp_path / 'discrete')]) == 0
    summary = _read_json(tmp_path / 'discrete' / 'toy_bias_summary.json')
    assert summary['q_star'] == pytest.approx(2.)
    assert summary['relative_error'] <= 1e-4


def test_verify_scaling(tmp_path):
    config_file = _write_config(tmp_path, _small_config(scaling={'num_random': 1}))
    out = tmp_path / 'run'
    assert main(['verify-scaling', '--config', config_file, '--out', str(out)]) == 0
    table = pd.read_csv(out / 'scaling.csv')
    assert len(table) == 2
    # identity triple
    assert table['max_deviation'].iloc[0] < 1e-12
    summary = _read_json(out / 'scaling_summary.json')
    assert summary['functional_pass'] is True
    assert (out / 'scaling_functional.csv').is_file()
    assert (out / 'scaling.svg').is_file()

    config_file = _write_config(tmp_path, _small_config(scaling={'num_seeds': 20}), name='with_seeds.json')
    assert main(['verify-scaling', '--config', config_file, '--out', str(tmp_path / 'run2')]) == 0
    measurement = pd.read_csv(tmp_path / 'run2' / 'scaling_measurement.csv')
    assert len(measurement) == 4 * 8 * 8
    assert set(measurement.columns) >= {'bin', 'i', 'j', 'k', 'mean', 'mean_hat', 'z'}
    assert 'z_threshold' in _read_json(tmp_path / 'run2' / 'scaling_summary.json')
    # identity triple: the two sample sets follow the same law
    assert np.all(np.abs(measurement['z'].values) <= 6.)


if __name__ == '__main__':
    import matplotlib.pyplot as plt
    from pathlib import Path
    import tempfile
    test_toy_bias(Path(tempfile.mkdtemp()))
