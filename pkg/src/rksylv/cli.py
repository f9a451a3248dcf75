"""Command line interface: ``blk-rksylv bench ...``.

Exit codes: 0 when every strategy converged, 2 when at least one did not,
1 on errors (bad arguments, failed solves).
"""

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from .bench import BenchmarkSpec, build, emit_csv, emit_json, emit_table, run
from .errors import RKSylvError
from .poles import FovOptions
from .sylvester import SolveOptions

log = logging.getLogger('rksylv')


def _read_poles(path):
    """One pole per line (``1.5``, ``-2+3j``, ``inf``); ``#`` starts a comment."""
    poles = []
    for line in Path(path).read_text(encoding='utf-8').splitlines():
        line = line.split('#', 1)[0].strip()
        if line:
            poles.append(complex(line.replace(' ', '')))
    if not poles:
        raise ValueError(f'no poles in {path}')
    return poles


def _strategy(arg):
    # pole files are read later so that I/O errors get the regular exit code
    if arg.startswith('fixed:'):
        return ('fixed', arg[len('fixed:'):])
    if arg not in ('adm', 'sadm', 'ext'):
        raise argparse.ArgumentTypeError(f'unknown pole strategy {arg!r}')
    return arg


def build_parser():
    p = argparse.ArgumentParser(prog='blk-rksylv',
                                description='Block rational Krylov Sylvester solver benchmarks')
    p.add_argument('-v', '--verbose', action='store_true')
    sub = p.add_subparsers(dest='command', required=True)
    b = sub.add_parser('bench', help='run the Poisson or convection-diffusion benchmark')
    b.add_argument('--problem', choices=['poisson', 'convdiff'], default='poisson')
    b.add_argument('--n', type=int, default=4096, help='interior grid points per direction')
    b.add_argument('--epsilon', type=float, default=0.0083, help='viscosity (convdiff)')
    b.add_argument('--tol', type=float, default=1e-8)
    b.add_argument('--maxit', type=int, default=100)
    b.add_argument('--poles', type=_strategy, action='append',
                   help='adm, sadm, ext or fixed:FILE; repeatable (default: adm, sadm, ext)')
    b.add_argument('--fov-samples', type=int, default=200)
    b.add_argument('--fov-source', choices=['projected', 'operator'], default='projected')
    b.add_argument('--pair-conjugates', action='store_true',
                   help='follow every non-real pole by its conjugate')
    b.add_argument('--rhs-rank', type=int, default=None, help='override the truncation rank')
    b.add_argument('--out', type=Path, default=None, help='directory for CSV output')
    b.add_argument('--format', choices=['csv', 'table', 'json'], default='table')
    return p


def _bench(args):
    opts = SolveOptions(tol=args.tol, max_iter=args.maxit,
                        fov=FovOptions(samples=args.fov_samples, source=args.fov_source),
                        pair_conjugates=args.pair_conjugates)
    spec = BenchmarkSpec(problem=args.problem, n=args.n, epsilon=args.epsilon,
                         rank=args.rhs_rank, options=opts)
    strategies = [('fixed', _read_poles(s[1])) if isinstance(s, tuple) else s
                  for s in args.poles or ['adm', 'sadm', 'ext']]
    problem = build(spec)
    log.info('%s n=%d block size %d', spec.problem, spec.n, problem.block_size)
    records = run(spec, strategies, problem=problem)
    if args.format == 'json':
        print(emit_json(records))
    elif args.format == 'csv':
        out = args.out or Path('.')
        for path in emit_csv(records, out, prefix=f'{spec.problem}_'):
            print(path)
    else:
        print(emit_table(records))
    if args.out is not None and args.format != 'csv':
        emit_csv(records, args.out, prefix=f'{spec.problem}_')
    if any(r.error for r in records):
        for r in records:
            if r.error:
                log.error('%s: %s', r.strategy, r.error)
        return 1
    return 0 if all(r.converged for r in records) else 2


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format='%(levelname)s %(message)s')
    try:
        return _bench(args)
    except (RKSylvError, ValueError, OSError) as exc:
        log.error('%s', exc)
        return 1


if __name__ == '__main__':
    sys.exit(main())
