"""Poisson and convection-diffusion benchmarks on the unit square.

Both use ``n`` interior grid points per direction with spacing
``h = 1/(n+1)`` and a low-rank right-hand side obtained from the grid samples
of ``f(x, y) = 1/(1 + x + y)``.
"""

import csv
import json
import time
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .brad import is_inf
from .errors import RKSylvError
from .sylvester import SolveOptions, SylvesterProblem, solve

__all__ = ['BenchmarkSpec', 'RunRecord', 'grid', 'laplacian_1d', 'derivative_1d',
           'low_rank_rhs', 'build_poisson', 'build_convdiff', 'build', 'run',
           'emit_csv', 'emit_table', 'emit_json', 'default_rhs']

CSV_COLUMNS = ('iter', 'k', 'residual_rel', 'pole_re', 'pole_im', 'time_s')


def default_rhs(x, y):
    return 1.0 / (1.0 + x + y)


def default_phi(x):
    return 1.0 + (x + 1.0) ** 2 / 4.0


def default_psi(y):
    return y / 2.0


def grid(n):
    """Interior points ``h, 2h, ..., nh`` of [0, 1] with ``h = 1/(n+1)``."""
    h = 1.0 / (n + 1)
    return h * np.arange(1, n + 1), h


def laplacian_1d(n):
    """``(1/h^2) tridiag(1, -2, 1)`` in CSR format."""
    _, h = grid(n)
    e = np.ones(n)
    return sp.diags([e[1:], -2 * e, e[1:]], [-1, 0, 1], format='csr') / h ** 2


def derivative_1d(n):
    """Centered difference ``(1/2h) tridiag(-1, 0, 1)``; exactly skew-symmetric."""
    _, h = grid(n)
    e = np.ones(n - 1) / (2 * h)
    return sp.diags([-e, e], [-1, 1], format='csr')


def low_rank_rhs(F_func, n, tol=None, rank=None, oversample=16, seed=0):
    """Truncated SVD ``F ~ (U S) V^H`` of the grid samples of ``F_func``.

    A randomized range finder (two power iterations) avoids the full SVD; the
    sketch is widened until the trailing singular value drops below the
    truncation threshold ``tol * sigma_1``.  The default ``tol`` is
    ``n * eps``, the usual numerical-rank threshold.  Returns
    ``(u, v, sigma)``.
    """
    x, _ = grid(n)
    F = F_func(x[:, None], x[None, :])
    rng = np.random.default_rng(seed)
    tol = n * np.finfo(float).eps if tol is None else tol
    width = min(n, 16 + oversample)
    while True:
        Q, _ = np.linalg.qr(F @ rng.standard_normal((n, width)))
        for _ in range(2):
            Q, _ = np.linalg.qr(F.T @ Q)
            Q, _ = np.linalg.qr(F @ Q)
        Ub, s, Vh = np.linalg.svd(Q.T @ F, full_matrices=False)
        if width >= n or s[-1] < tol * s[0]:
            break
        width = min(n, 2 * width)
    r = rank if rank is not None else int(np.sum(s > tol * s[0]))
    U = Q @ Ub[:, :r]
    return U * s[:r], Vh[:r].conj().T, s


@dataclass
class BenchmarkSpec:
    problem: str = 'poisson'
    n: int = 4096
    epsilon: float = 0.0083
    rhs: object = default_rhs
    rank_tol: float = None
    rank: int = None
    options: SolveOptions = field(default_factory=SolveOptions)

    def __post_init__(self):
        if self.problem not in ('poisson', 'convdiff'):
            raise ValueError(f'unknown problem {self.problem!r}')
        if self.n < 16:
            raise ValueError('n must be at least 16')
        if self.problem == 'convdiff' and not self.epsilon > 0:
            raise ValueError('epsilon must be positive')


@dataclass
class RunRecord:
    strategy: str
    rows: list
    iterations: int
    final_residual: float
    total_seconds: float
    converged: bool
    error: str = None

    def to_dict(self):
        return asdict(self)


def build_poisson(n, rhs=default_rhs, rank_tol=None, rank=None):
    """``A X - X (-A) = u v^H`` with the 1D Laplacian ``A``."""
    A = laplacian_1d(n)
    u, v, _ = low_rank_rhs(rhs, n, rank_tol, rank)
    return SylvesterProblem(A, -A, u, v)


def build_convdiff(n, epsilon=0.0083, w=(default_phi, default_psi), rhs=default_rhs,
                   rank_tol=None, rank=None):
    """``(eps A + Phi D) X + X (eps A + D^H Psi) = F`` in the form ``A1 X - X B1 = u v^H``."""
    x, _ = grid(n)
    L = laplacian_1d(n)
    D = derivative_1d(n)
    Phi = sp.diags(w[0](x))
    Psi = sp.diags(w[1](x))
    A1 = (epsilon * L + Phi @ D).tocsr()
    B1 = (-(epsilon * L + D.conj().T @ Psi)).tocsr()
    u, v, _ = low_rank_rhs(rhs, n, rank_tol, rank)
    return SylvesterProblem(A1, B1, u, v)


def build(spec):
    if spec.problem == 'poisson':
        return build_poisson(spec.n, spec.rhs, spec.rank_tol, spec.rank)
    return build_convdiff(spec.n, spec.epsilon, rhs=spec.rhs, rank_tol=spec.rank_tol,
                          rank=spec.rank)


_DISPLAY = {'adm': 'ADM', 'sadm': 'sADM', 'ext': 'ext', 'extended': 'ext'}


def _strategy_name(s):
    if isinstance(s, str):
        return _DISPLAY.get(s.lower(), s)
    return getattr(s, 'name', type(s).__name__)


def _pole_parts(x):
    if is_inf(x):
        return np.inf, 0.0
    return float(np.real(x)), float(np.imag(x))


def run(spec, strategies, problem=None):
    """Run each strategy on the benchmark; returns one :class:`RunRecord` per strategy.

    Timing covers the solve only, not the assembly.  A failing strategy is
    recorded with its error and the remaining ones still run.
    """
    problem = problem if problem is not None else build(spec)
    records = []
    for s in strategies:
        opts = SolveOptions(**{**spec.options.__dict__, 'pole_strategy': s})
        if isinstance(s, tuple):
            opts.pole_strategy, opts.fixed_poles = 'fixed', s[1]
            name = 'fixed'
        else:
            name = _strategy_name(s)
        t0 = time.perf_counter()
        try:
            sol, state = solve(problem, opts)
        except RKSylvError as exc:
            records.append(RunRecord(name, [], 0, float('nan'), time.perf_counter() - t0,
                                     False, f'{type(exc).__name__}: {exc}'))
            continue
        rows = []
        for h in state.history:
            re, im = _pole_parts(h['pole_A'])
            rows.append({'iter': h['iteration'], 'k': h['order'],
                         'residual_rel': h['relative_residual'],
                         'pole_re': re, 'pole_im': im, 'time_s': h['time']})
        records.append(RunRecord(name, rows, sol.iterations, sol.residual,
                                 time.perf_counter() - t0, sol.converged))
    return records


def emit_csv(records, out_dir, prefix=''):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for r in records:
        p = out / f'{prefix}{r.strategy}.csv'
        with open(p, 'w', newline='', encoding='utf-8') as fh:
            wr = csv.DictWriter(fh, fieldnames=CSV_COLUMNS)
            wr.writeheader()
            for row in r.rows:
                wr.writerow({k: repr(float(row[k])) if k not in ('iter', 'k') else row[k]
                             for k in CSV_COLUMNS})
        paths.append(p)
    return paths


def emit_table(records):
    lines = [f'{"poles":<8}{"iter":>6}{"residual":>12}{"time (s)":>10}']
    for r in records:
        if r.error:
            lines.append(f'{r.strategy:<8}{"-":>6}{"error":>12}{r.total_seconds:>10.2f}  {r.error}')
        else:
            lines.append(f'{r.strategy:<8}{r.iterations:>6}{r.final_residual:>12.2e}'
                         f'{r.total_seconds:>10.2f}')
    return '\n'.join(lines)


def emit_json(records):
    def enc(o):
        if isinstance(o, float) and not np.isfinite(o):
            return str(o)
        raise TypeError(type(o))
    data = [r.to_dict() for r in records]
    for d in data:
        for row in d['rows']:
            for k, val in row.items():
                if isinstance(val, float) and not np.isfinite(val):
                    row[k] = 'inf' if val > 0 else ('-inf' if val < 0 else 'nan')
        if isinstance(d['final_residual'], float) and not np.isfinite(d['final_residual']):
            d['final_residual'] = None
    return json.dumps(data, indent=2, default=enc)
