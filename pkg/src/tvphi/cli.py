import argparse
import importlib.metadata
import logging
import pathlib
import sys

from . import __version__
from .util import (
    TVPhiConfigError, TVPhiConvergenceError, TVPhiDegenerateError, TVPhiException, parse_cutoff, write_table
)

log = logging.getLogger(__name__)


class ArgumentParser(argparse.ArgumentParser):
    """Argument parser reporting usage errors with exit code 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f'{self.prog}: error: {message}\n')


def _cutoff(value):
    try:
        return parse_cutoff(value)
    except TVPhiConfigError as e:
        raise argparse.ArgumentTypeError(str(e))


def _cutoff_list(value):
    return [_cutoff(v) for v in value.split(',') if v.strip()]


def _fit_cutoff(value):
    if value.strip().lower() == 'free':
        return None
    return _cutoff(value)


def _default(name):
    from .solver import SolverConfig
    return SolverConfig.param[name].default


def _add_protocol_args(parser):
    from .db import get_preset_list
    parser.add_argument(
        '--preset',
        choices=get_preset_list(),
        help='Load q, M, α^∞ and σ of a named experiment. Explicit flags override preset values.'
    )
    parser.add_argument('--q', type=float, help=f'Exponent q of the t^q integrand, in (0, 2) (default: {_default("q")})')
    parser.add_argument(
        '--M',
        type=_cutoff,
        help=f'Cut-off M in gray levels per pixel; `inf` selects plain t^q with α = α^∞, 0 selects plain TV (default: {_default("M")})'
    )
    parser.add_argument(
        '--alpha-inf',
        type=float,
        help=f'Asymptotic regularization weight α^∞, held fixed while M varies (default: {_default("alpha_infty")})'
    )
    parser.add_argument('--eta0', type=float, help=f'Weight η_0 of the multiscale functional; 0 disables it (default: {_default("eta0")})')
    parser.add_argument('--eps1', type=float, help=f'Largest mollifier scale ε_1 in pixels (default: {_default("eps1")})')
    parser.add_argument('--levels', type=int, help=f'Number of η levels K (default: {_default("K")})')
    parser.add_argument(
        '--sigma',
        type=float,
        help='Noise standard deviation in gray levels. When positive, seeded Gaussian noise is added to the input first and the regularizers are weighted by σ²; 0 adds no noise (default: no noise, σ = 1)'
    )
    parser.add_argument('--seed', type=int, help=f'Seed of the noise generator (default: {_default("seed")})')


def _config(args):
    from .solver import SolverConfig
    flags = {
        'q': args.q, 'M': args.M, 'alpha_infty': args.alpha_inf, 'eta0': args.eta0, 'eps1': args.eps1,
        'K': args.levels, 'seed': args.seed,
    }
    # σ = 0 adds no noise and keeps the default regularizer weighting
    if args.sigma:
        flags['sigma'] = args.sigma
    given = {k: v for k, v in flags.items() if v is not None}
    if args.preset:
        return SolverConfig.from_db(args.preset, **given)
    return SolverConfig(**given)


def _noisy_input(args, cfg):
    from .image import add_gaussian_noise, read_pgm
    z = read_pgm(args.input)
    if args.sigma is not None:
        z = add_gaussian_noise(z, args.sigma, cfg.seed)
    return z


def build_parser():
    parser = ArgumentParser(
        description=importlib.metadata.metadata(__package__).get('summary')
    )
    parser.set_defaults(func=lambda args: parser.print_help())
    parser.add_argument('-V', '--version', action='version', version=__version__)
    parser.add_argument('-v', '--verbose', action='count', default=0, help='Log progress (-v) or debug detail (-vv)')

    subparsers = parser.add_subparsers()

    denoise_parser = subparsers.add_parser(
        'denoise',
        help='Denoise a PGM image with a TV^φ regularizer'
    )
    denoise_parser.set_defaults(func=denoise)
    denoise_parser.add_argument('--input', required=True, help='Input 8-bit PGM image (P2 or P5)')
    denoise_parser.add_argument('--output', required=True, help='Output PGM path (P5)')
    _add_protocol_args(denoise_parser)
    denoise_parser.add_argument('--ref', help='Ground truth PGM. When given, PSNR (dB) and SSIM of the output are printed (default: none)')
    denoise_parser.add_argument(
        '--noisy-output',
        help='Where to write the noisy image when --sigma is given (default: <output>_noisy.pgm)'
    )
    denoise_parser.add_argument('--report', help='Solver report CSV path (default: <output>_report.csv)')

    sweep_parser = subparsers.add_parser(
        'sweep',
        help='Denoise once per cut-off M with α^∞ and q held fixed and tabulate PSNR and SSIM'
    )
    sweep_parser.set_defaults(func=sweep)
    sweep_parser.add_argument('--input', required=True, help='Input 8-bit PGM image')
    sweep_parser.add_argument('--ref', required=True, help='Ground truth PGM for the metrics')
    sweep_parser.add_argument(
        '--Ms',
        type=_cutoff_list,
        default='0,10,20,40,inf',
        help='Comma separated cut-offs, `inf` allowed (default: 0,10,20,40,inf)'
    )
    _add_protocol_args(sweep_parser)
    sweep_parser.add_argument('--output', default='sweep.csv', help='Table CSV path (default: sweep.csv)')
    sweep_parser.add_argument('--jobs', type=int, default=1, help='Number of solves run concurrently (default: 1)')

    fit_parser = subparsers.add_parser(
        'fit',
        help='Fit gradient-distribution models to the log-histogram of |∇u|'
    )
    fit_parser.set_defaults(func=fit)
    fit_parser.add_argument('--input', required=True, help='Input 8-bit PGM image')
    fit_parser.add_argument('--bins', type=int, default=64, help='Number of histogram bins, at least 8 (default: 64)')
    fit_parser.add_argument(
        '--edge-threshold',
        type=float,
        default=30.0,
        help='Gradient magnitude in gray levels per pixel separating edge from smooth pixels (default: 30)'
    )
    fit_parser.add_argument('--mode', choices=['full', 'edge', 'smooth'], default='full', help='Pixels to include (default: full)')
    fit_parser.add_argument('--model', choices=['power', 'linearized'], default='power', help='Model family (default: power)')
    fit_parser.add_argument(
        '--M',
        type=_fit_cutoff,
        default=None,
        help='Cut-off of the linearized model in gray levels per pixel, or `free` to fit it (default: free)'
    )
    fit_parser.add_argument('--hist-output', default='hist.csv', help='Histogram CSV path (default: hist.csv)')
    fit_parser.add_argument('--fit-output', default='fit.csv', help='Fit CSV path (default: fit.csv)')

    demo_parser = subparsers.add_parser(
        'demo',
        help='Run numerical witnesses of the energy limit laws'
    )
    demo_parser.set_defaults(func=demo)
    demo_parser.add_argument(
        '--name',
        choices=['ramp', 'step', 'linlimit', 'annihilation', 'compact', 'all'],
        default='all',
        help='Demo to run (default: all)'
    )
    demo_parser.add_argument('--outdir', default='.', help='Directory receiving <name>.csv (default: current directory)')

    return parser


def main(argv=None):
    """Parse arguments, run a subcommand and return its exit code: 0 success, 1 usage or input error, 2 runtime error."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return e.code or 0

    level = [logging.WARNING, logging.INFO, logging.DEBUG][min(args.verbose, 2)]
    logging.basicConfig(level=level, format='%(levelname)s %(name)s: %(message)s')

    try:
        return args.func(args) or 0
    except (TVPhiConvergenceError, TVPhiDegenerateError) as e:
        print('Error:', e)
        return 2
    except (TVPhiException, ValueError) as e:
        print('Error:', e)
        return 1


def cli():
    sys.exit(main())


def _sibling(path, suffix):
    path = pathlib.Path(path)
    return path.with_name(f'{path.stem}{suffix}')


def denoise(args):
    from .image import read_pgm, write_pgm
    from .metrics import measure
    from .solver import denoise as run

    cfg = _config(args)
    z = _noisy_input(args, cfg)
    if args.sigma is not None:
        write_pgm(z, args.noisy_output or _sibling(args.output, '_noisy.pgm'))

    out, report = run(z, cfg)
    write_pgm(out, args.output)
    write_table(report.to_frame(), args.report or _sibling(args.output, '_report.csv'))

    if args.ref:
        print(measure(out, read_pgm(args.ref)))


def mark_best(table):
    """Add `*` marker columns for the best PSNR and SSIM, ties going to the smallest M."""
    table = table.copy()
    Ms = table['M'].map(parse_cutoff)
    for column in ('PSNR', 'SSIM'):
        best = max(range(len(table)), key=lambda i: (table[column].iloc[i], -Ms.iloc[i]))
        table[f'{column}_best'] = ['*' if i == best else '' for i in range(len(table))]
    return table


def sweep(args):
    from .image import read_pgm
    from .solver import sweep_M

    cfg = _config(args)
    z = _noisy_input(args, cfg)
    table = mark_best(sweep_M(z, cfg, args.Ms, read_pgm(args.ref), jobs=args.jobs))
    write_table(table, args.output)
    print(table.to_string(index=False))


def fit(args):
    from .image import read_pgm
    from .stats import fit_linearized, fit_power, gradient_histogram, split_edges

    u = read_pgm(args.input)
    mask = None
    if args.mode != 'full':
        edge, smooth = split_edges(u, args.edge_threshold)
        mask = edge if args.mode == 'edge' else smooth
    hist = gradient_histogram(u, bins=args.bins, mask=mask)
    write_table(hist.to_frame(), args.hist_output)

    result = fit_power(hist) if args.model == 'power' else fit_linearized(hist, args.M)
    frame = result.to_frame()
    write_table(frame, args.fit_output)
    print(' '.join(f'{k}={v}' for k, v in frame.iloc[0].items()))


def demo(args):
    from .demos import DEMOS, run_demo

    names = list(DEMOS) if args.name == 'all' else [args.name]
    passed = True
    for name in names:
        trace = run_demo(name, args.outdir)
        print(f'{name}: {trace.verdict}')
        passed &= trace.passed
    return 0 if passed else 2
