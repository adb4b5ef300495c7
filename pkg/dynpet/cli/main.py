"""
Command line entry point:

    dynpet simulate|reconstruct|sweep-q|toy-bias|verify-scaling --config <path> [--out <dir>]
           [--seed <u64>] [--threads <n>]

Exit codes: 0 success, 1 solver or numeric failure, 2 input error.
"""
from pathlib import Path
import argparse
import sys


_commands = {
    'simulate': 'Sample a listmode from the configured ground truth',
    'reconstruct': 'Reconstruct a listmode and report the objective and the invariant checks',
    'sweep-q': 'Count the events explained as scatter along a list of q',
    'toy-bias': 'Toy minimizers along q and the debiasing threshold',
    'verify-scaling': 'Numerical check of the scaling invariances',
}

_with_listmode = ('reconstruct', 'sweep-q')


def get_parser():
    parser = argparse.ArgumentParser(prog='dynpet', description='Dynamic PET listmode simulation and reconstruction')
    subparsers = parser.add_subparsers(dest='command', required=True)
    for name, help in _commands.items():
        p = subparsers.add_parser(name, help=help, description=help)
        p.add_argument('--config', type=str, default=None, help='Json config (all defaults if omitted)')
        p.add_argument('--out', type=str, default='.', help='Output folder')
        p.add_argument('--seed', type=int, default=None, help='Overrides solver.seed')
        p.add_argument('--threads', type=int, default=None,
                       help='Overrides solver.n_jobs (1 gives bit identical reruns)')
        p.add_argument('--verbose', action='store_true')
        if name in _with_listmode:
            p.add_argument('--listmode', type=str, default=None,
                           help='Listmode file (default: io.listmode in the output folder)')
    return parser


def main(argv=None) -> int:
    args = get_parser().parse_args(argv)

    # plots are written to svg files, never displayed
    import matplotlib
    matplotlib.use('Agg')

    from .config import ReconConfig
    from . import commands
    from ..solvers import DynpetSolverError

    out_folder = Path(args.out)
    try:
        config = ReconConfig.from_json(args.config) if args.config is not None else ReconConfig()
        config = config.override(seed=args.seed, n_jobs=args.threads)
        config.to_json(out_folder / 'config.json')

        if args.command == 'simulate':
            commands.cmd_simulate(config, out_folder, verbose=args.verbose)
        elif args.command == 'reconstruct':
            commands.cmd_reconstruct(config, out_folder, listmode_path=args.listmode, verbose=args.verbose)
        elif args.command == 'sweep-q':
            commands.cmd_sweep_q(config, out_folder, listmode_path=args.listmode, verbose=args.verbose)
        elif args.command == 'toy-bias':
            commands.cmd_toy_bias(config, out_folder, verbose=args.verbose)
        elif args.command == 'verify-scaling':
            commands.cmd_verify_scaling(config, out_folder, verbose=args.verbose)
    except (DynpetSolverError, FloatingPointError) as err:
        print(f'dynpet {args.command}: {err}', file=sys.stderr)
        return 1
    except (ValueError, OSError) as err:
        # ConfigError and ListmodeFormatError are ValueError
        print(f'dynpet {args.command}: {err}', file=sys.stderr)
        return 2
    return 0


if __name__ == '__main__':
    raise SystemExit(main())
