"""
The `dynpet` subcommands. Each takes a validated ReconConfig and an output folder, writes its
files there and returns a json serializable summary.
"""
from pathlib import Path
import json

import numpy as np
import pandas as pd
import matplotlib.pyplot as plt

from ..core import ScannerGeometry, GridMeasure, check_json
from ..listmode import (Listmode, GroundTruth, sample_poisson_listmode, expected_event_count, scatter_fraction,
                        read_listmode, write_listmode, write_hidden_labels, label_dtype)
from ..objective import check_continuity
from ..solvers import run_solver
from ..debias import (ToyModel, toy_switch_q, toy_bias_table, heuristic_q, count_scatter_curve)
from ..scaling import (ScaleTriple, read_beta_table, beta_heuristic, functional_invariance,
                       measurement_invariance, z_threshold)
from ..widgets import (plot_slice_mass, plot_trajectory_overlay, plot_objective_decay, plot_scatter_count_curve,
                       plot_toy_bias, plot_scaling_check)


def _write_json(d, file_path):
    file_path = Path(file_path)
    file_path.parent.mkdir(parents=True, exist_ok=True)
    file_path.write_text(json.dumps(check_json(d), indent=4), encoding='utf8')
    return file_path


def _save_widget(W, file_path):
    W.save(file_path, format='svg')
    plt.close(W.figure)
    return Path(file_path).name


def _print_summary(title, summary):
    print(title)
    for k, v in summary.items():
        if not isinstance(v, (dict, list)):
            print(f'  {k}: {v}')


def estimate_total_mass(config, num_events):
    """Spacetime mass explaining `num_events` events on average."""
    m = config.model
    return num_events * m['T_half'] / (m['p_s'] + m['p_d'])


def resolve_q_beta(config, geometry, num_events):
    """
    Numeric q and beta, with the "heuristic" entries computed from the estimated mass.
    Without events the heuristics fall back to 1.
    """
    m = config.model
    total_mass = estimate_total_mass(config, num_events)

    q = m['q']
    if q == 'heuristic':
        q = 1.
        if total_mass > 0:
            q = heuristic_q(geometry, m['p_s'], m['p_d'], total_mass, mode=m['mode'], kernel=m['sigma'])

    beta = m['beta']
    if beta == 'heuristic':
        beta = 1.
        if total_mass > 0:
            table = read_beta_table(m['beta_table']) if m['beta_table'] is not None else None
            speed = m['beta_speed'] if m['beta_speed'] is not None else config.truth['speed']
            length = m['beta_length'] if m['beta_length'] is not None else geometry.radius_D
            beta = beta_heuristic(speed, length, total_mass / geometry.T, m['T_half'], table=table)
    return float(q), float(beta)


def load_listmode(config, folder, listmode_path=None):
    """
    Read the listmode of a previous `simulate` run and check it against the configured geometry.
    A geometry sidecar written next to the listmode must have the same hash.
    """
    geometry = config.get_geometry()
    listmode_path = Path(listmode_path) if listmode_path is not None else config.resolve_path('listmode', folder)
    sidecar = listmode_path.parent / Path(config.io['geometry']).name
    if sidecar.is_file():
        written = ScannerGeometry.load_from_json(sidecar)
        if not written.is_same(geometry):
            raise ValueError(f'geometry mismatch: {listmode_path} was simulated with {written}, '
                             f'the config describes {geometry}')
    listmode = read_listmode(listmode_path, geometry)
    if listmode.mode != config.model['mode']:
        if listmode.mode == 'continuous':
            listmode = listmode.to_discrete()
        else:
            raise ValueError(f'{listmode_path} holds discrete events, a continuous model needs continuous events')
    return listmode


def _solver_params(config, with_jobs=True):
    params = dict(config.solver['params'])
    if config.solver['name'] == 'particles' and with_jobs:
        params.setdefault('n_jobs', config.solver['n_jobs'])
    return params


def cmd_simulate(config, out_folder, verbose=False):
    """
    Sample a listmode from the configured ground truth.

    Writes the listmode, the hidden labels, the ground truth, the geometry and a summary.
    The sampler seed is solver.seed, truth.seed only drives the random scene layout.
    """
    out_folder = Path(out_folder)
    out_folder.mkdir(parents=True, exist_ok=True)
    geometry = config.get_geometry()
    m = config.model
    seed = config.solver['seed']

    ground_truth = config.get_ground_truth(geometry)
    if ground_truth is None:
        listmode = Listmode(None, geometry, mode=m['mode'], seed=seed)
        labels = np.zeros(0, dtype=label_dtype)
        expected = 0.
    else:
        listmode, labels = sample_poisson_listmode(ground_truth, m['p_s'], m['p_d'], kernel=m['sigma'],
                                                   mode=m['mode'], seed=seed, return_labels=True,
                                                   n_jobs=config.solver['n_jobs'], progress_bar=verbose)
        expected = expected_event_count(ground_truth, m['p_s'], m['p_d'])
        ground_truth.annotate(kind=config.truth['kind'], sampler_seed=seed)
        ground_truth.dump_to_json(config.resolve_path('ground_truth', out_folder))

    write_listmode(listmode, config.resolve_path('listmode', out_folder))
    write_hidden_labels(labels, config.resolve_path('labels', out_folder))
    geometry.dump_to_json(config.resolve_path('geometry', out_folder))

    summary = {
        'num_events': len(listmode),
        'expected_num_events': float(expected),
        'scatter_fraction': scatter_fraction(labels),
        'expected_scatter_fraction': m['p_s'] / (m['p_s'] + m['p_d']),
        'mode': listmode.mode,
        'seed': seed,
        'geometry_hash': geometry.get_hash(),
    }
    _write_json(summary, out_folder / 'simulate_summary.json')
    _print_summary('simulate', summary)
    return summary


def _check(name, value, threshold):
    return dict(name=name, value=float(value), threshold=float(threshold),
                status='pass' if value <= threshold else 'fail')


def invariant_checks(reconstruction):
    """
    Nonnegativity, conservation and continuity of a grid result, or nonnegative masses and
    trajectories inside D for a particle result. Values are compared to their thresholds with <=.
    """
    checks = []
    result = reconstruction.result
    checks.append(_check('feasible', 0. if reconstruction.value.feasible else 1., 0.))
    if isinstance(result, GridMeasure):
        mass = abs(result.total_mass())
        checks.append(_check('nonnegative', max(0., -float(np.min(result.rho))), 1e-14))
        checks.append(_check('continuity', check_continuity(result)[0], 1e-8 * mass))
        masses = result.slice_masses()
        spread = float(np.max(masses) - np.min(masses)) if masses.size > 0 else 0.
        checks.append(_check('slice_mass_spread', spread, 1e-8 * float(np.max(np.abs(masses)))))
        checks.append(_check('mass_outside_D', result.mass_outside_mask(), 1e-8 * mass))
    else:
        masses = np.asarray(result.masses)
        negative = max(0., -float(np.min(masses))) if masses.size > 0 else 0.
        checks.append(_check('nonnegative', negative, 0.))
        checks.append(_check('inside_D', 0. if result.check_inside() else 1., 0.))
    return checks


def cmd_reconstruct(config, out_folder, listmode_path=None, verbose=False):
    """
    Run the configured solver on a listmode and write the result, the plots and report.json.
    """
    out_folder = Path(out_folder)
    out_folder.mkdir(parents=True, exist_ok=True)
    geometry = config.get_geometry()
    listmode = load_listmode(config, out_folder, listmode_path)
    model = config.get_model(geometry)
    q, beta = resolve_q_beta(config, geometry, len(listmode))
    solver_name = config.solver['name']

    reconstruction = run_solver(solver_name, listmode, model, output_folder=out_folder / 'reconstruction',
                                verbose=verbose, q=q, beta=beta, **_solver_params(config))

    plots = []
    result = reconstruction.result
    if isinstance(result, GridMeasure):
        plots.append(_save_widget(plot_slice_mass(result), out_folder / 'slice_mass.svg'))
    else:
        ground_truth = None
        gt_file = config.resolve_path('ground_truth', out_folder)
        if gt_file.is_file():
            ground_truth = GroundTruth.load_from_json(gt_file)
        plots.append(_save_widget(plot_trajectory_overlay(result, ground_truth=ground_truth),
                                  out_folder / 'trajectories.svg'))
    plots.append(_save_widget(plot_objective_decay(reconstruction), out_folder / 'objective_decay.svg'))

    checks = invariant_checks(reconstruction)
    all_pass = all(c['status'] == 'pass' for c in checks)
    report = {
        'solver_name': solver_name,
        'num_events': len(listmode),
        'q': q,
        'beta': beta,
        'objective': reconstruction.value.to_dict(),
        'checks': checks,
        'all_pass': all_pass,
        'plots': plots,
        'geometry_hash': geometry.get_hash(),
    }
    _write_json(report, out_folder / 'report.json')
    _print_summary('reconstruct', dict(solver_name=solver_name, num_events=len(listmode), q=q, beta=beta,
                                       J=reconstruction.value.total, all_pass=all_pass))
    for c in checks:
        if c['status'] != 'pass':
            print(f"  check {c['name']} failed: {c['value']:.3e} > {c['threshold']:.3e}")
    return report


def cmd_sweep_q(config, out_folder, listmode_path=None, verbose=False):
    """
    Number of events explained as scatter along sweep.q_values, written to sweep_q.csv.
    """
    out_folder = Path(out_folder)
    out_folder.mkdir(parents=True, exist_ok=True)
    geometry = config.get_geometry()
    listmode = load_listmode(config, out_folder, listmode_path)
    model = config.get_model(geometry)
    _, beta = resolve_q_beta(config, geometry, len(listmode))

    # parallelism goes to the q values
    curve = count_scatter_curve(listmode, model, config.sweep['q_values'], solver_name=config.solver['name'],
                                rtol=config.sweep['rtol'], n_jobs=config.solver['n_jobs'], progress_bar=verbose,
                                beta=beta, **_solver_params(config, with_jobs=False))
    curve.to_csv(out_folder / 'sweep_q.csv', index=False)
    W = plot_scatter_count_curve(curve, num_events=len(listmode), log_q=bool(np.any(curve['q'] > 0)))
    plot_name = _save_widget(W, out_folder / 'sweep_q.svg')

    lo, hi = curve['N_s_lo'].values, curve['N_s_hi'].values
    summary = {
        'num_events': len(listmode),
        'beta': beta,
        'num_q': len(curve),
        'N_s_first': int(lo[0]),
        'N_s_last': int(hi[-1]),
        'monotone': bool(np.all(np.diff(lo) >= 0) and np.all(np.diff(hi) >= 0)),
        'plot': plot_name,
    }
    _write_json(summary, out_folder / 'sweep_q_summary.json')
    _print_summary('sweep-q', summary)
    return summary


def cmd_toy_bias(config, out_folder, verbose=False):
    """
    Toy minimizers along q and the switch to unbiased reconstructions, written to toy_bias.csv.
    """
    out_folder = Path(out_folder)
    out_folder.mkdir(parents=True, exist_ok=True)
    t = config.toy
    toy = ToyModel(t['variant'], t['p_s'], t['n'], t['m'], t['peak'])
    # a single source event is explained as scatter for every q
    q_star = toy.threshold() if toy.m >= 2 else np.inf
    q_switch = toy_switch_q(toy)

    if t['q_values'] is not None:
        q_values = np.asarray(t['q_values'])
    else:
        q_max = 2 * q_star if np.isfinite(q_star) and q_star > 0 else 1.
        q_values = np.linspace(0, q_max, t['num_q'])
    table = toy_bias_table(toy, q_values)
    table.to_csv(out_folder / 'toy_bias.csv', index=False)
    plot_name = _save_widget(plot_toy_bias(table, q_star=q_star if np.isfinite(q_star) else None),
                             out_folder / 'toy_bias.svg')

    summary = {
        'variant': toy.variant,
        'separated': toy.is_separated(),
        'q_star': q_star,
        'q_switch': q_switch,
        'relative_error': abs(q_switch - q_star) / q_star if np.isfinite(q_star) and q_star > 0 else 0.,
        'plot': plot_name,
    }
    _write_json(summary, out_folder / 'toy_bias_summary.json')
    _print_summary('toy-bias', summary)
    return summary


def cmd_verify_scaling(config, out_folder, verbose=False):
    """
    Scaling checks for the configured triple plus scaling.num_random random triples: the functional
    identity on random feasible pairs and (if scaling.num_seeds > 0) the rescaled measurement law.
    """
    out_folder = Path(out_folder)
    out_folder.mkdir(parents=True, exist_ok=True)
    geometry = config.get_geometry()
    m, s = config.model, config.scaling
    seed = config.solver['seed']

    ground_truth = config.get_ground_truth(geometry)
    if ground_truth is None:
        raise ValueError('truth.mass: the scaling checks need a nonzero ground truth')
    model = config.get_model(geometry)
    listmode = sample_poisson_listmode(ground_truth, m['p_s'], m['p_d'], kernel=m['sigma'], mode=m['mode'],
                                       seed=seed, n_jobs=config.solver['n_jobs'])
    q, beta = resolve_q_beta(config, geometry, len(listmode))

    rng = np.random.default_rng(seed)
    scales = [ScaleTriple(s['theta'], s['lam'], s['mu'])]
    scales += [ScaleTriple.random(rng, s['random_low'], s['random_high']) for _ in range(s['num_random'])]

    functional, measurement, rows = [], [], []
    for i, scale in enumerate(scales):
        df = functional_invariance(listmode, model, scale, num_pairs=s['num_pairs'], q=q, beta=beta, seed=seed + i)
        df.insert(0, 'scale', i)
        functional.append(df)
        J_scale = max(1., float(np.max(np.abs(df['J'].values))))
        row = dict(scale=i, theta=scale.theta, lam=scale.lam, mu=scale.mu,
                   max_deviation=float(df['deviation'].max()),
                   relative_deviation=float(df['deviation'].max()) / J_scale,
                   max_abs_z=np.nan)
        if s['num_seeds'] > 0:
            mi = measurement_invariance(ground_truth, m['p_s'], m['p_d'], m['sigma'], scale,
                                        num_seeds=s['num_seeds'], first_seed=seed, n_jobs=config.solver['n_jobs'],
                                        progress_bar=verbose)
            mi.insert(0, 'scale', i)
            measurement.append(mi)
            row['max_abs_z'] = float(np.max(np.abs(mi['z'].values)))
        rows.append(row)

    functional = pd.concat(functional, ignore_index=True)
    functional.to_csv(out_folder / 'scaling_functional.csv', index=False)
    measurement = pd.concat(measurement, ignore_index=True) if len(measurement) > 0 else None
    if measurement is not None:
        measurement.to_csv(out_folder / 'scaling_measurement.csv', index=False)
    table = pd.DataFrame(rows)
    table.to_csv(out_folder / 'scaling.csv', index=False)
    plot_name = _save_widget(plot_scaling_check(functional, measurement), out_folder / 'scaling.svg')

    summary = {
        'num_events': len(listmode),
        'num_scales': len(scales),
        'max_deviation': float(table['max_deviation'].max()),
        'max_relative_deviation': float(table['relative_deviation'].max()),
        'functional_pass': bool(table['relative_deviation'].max() <= 1e-9),
        'plot': plot_name,
    }
    if measurement is not None:
        summary['max_abs_z'] = float(table['max_abs_z'].max())
        # family wise level 1% over the bins of every checked triple
        summary['z_threshold'] = z_threshold(len(measurement))
        summary['measurement_pass'] = bool(table['max_abs_z'].max() <= summary['z_threshold'])
    _write_json(summary, out_folder / 'scaling_summary.json')
    _print_summary('verify-scaling', summary)
    return summary
