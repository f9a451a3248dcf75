"""Pole selection: field-of-values sampling, the ADM and sADM rules and the
extended / fixed baselines.

For the space generated by an operator ``M`` (``A`` or ``B^H``) with previous
finite poles ``xi`` and Ritz values ``mu`` (eigenvalues of the projection of
``M``), ADM picks the conjugate of::

    argmax_{lam in dW(N)}  prod |lam - conj(xi)|^b / prod |lam - conj(mu)|

where ``N`` is the other operator of the Sylvester equation.  sADM keeps only
one Ritz value per group of ``b`` (the closest of each group) and uses
exponent 1 on the pole factors.
"""

import enum
from dataclasses import dataclass, field
from itertools import cycle

import numpy as np
import scipy.linalg as spla
import scipy.sparse.linalg as spsla

from .brad import INF, is_inf
from .errors import FovEstimationFailed, InvalidContext
from .operators import BandedOperator, DenseOperator, Operator, as_operator

__all__ = ['FovProvenance', 'FovBoundarySamples', 'PoleContext', 'FovOptions',
           'fov_boundary', 'fov_boundary_operator', 'adm_objective', 'sadm_objective',
           'adm_next_pole', 'sadm_next_pole', 'PoleStrategy', 'AdaptiveStrategy',
           'ExtendedStrategy', 'FixedStrategy', 'make_strategy', 'next_pole_pair']


class FovProvenance(enum.Enum):
    USER_BOUNDS = 'user-supplied bounds'
    RITZ_HULL = 'Ritz convex hull'
    ROTATED_SWEEP = 'rotated-Hermitian-part sweep'


@dataclass(frozen=True, eq=False)
class FovBoundarySamples:
    points: np.ndarray
    provenance: FovProvenance

    def __post_init__(self):
        pts = _dedupe(np.asarray(self.points, dtype=complex).ravel())
        if pts.size < 2 or not np.all(np.isfinite(pts)):
            raise FovEstimationFailed('need at least two finite boundary samples')
        pts.setflags(write=False)
        object.__setattr__(self, 'points', pts)

    def __len__(self):
        return self.points.size


@dataclass(frozen=True, eq=False)
class PoleContext:
    """Previous finite poles and current Ritz values of one Krylov space."""

    poles: tuple
    ritz: np.ndarray
    block_size: int

    def finite_poles(self):
        return np.array([p for p in self.poles if not is_inf(p)], dtype=complex)


def _dedupe(pts):
    if pts.size == 0:
        return pts
    scale = max(np.abs(pts).max(), 1e-300)
    keep = [pts[0]]
    for p in pts[1:]:
        if np.min(np.abs(np.asarray(keep) - p)) > 1e-14 * scale:
            keep.append(p)
    return np.array(keep, dtype=complex)


def _rayleigh_sweep(M, angles):
    MH = M.conj().T
    m = M.shape[0]
    out = np.empty(angles.size, dtype=complex)
    for j, t in enumerate(angles):
        e = np.exp(1j * t)
        Ht = (e * M + np.conj(e) * MH) / 2
        try:
            _, q = spla.eigh(Ht, subset_by_index=[m - 1, m - 1])
        except (np.linalg.LinAlgError, ValueError) as exc:
            raise FovEstimationFailed(f'eigensolver failed at angle {t:.3f}') from exc
        q = q[:, 0]
        out[j] = np.vdot(q, M @ q) / np.vdot(q, q)
    return out


def _convex_hull(pts):
    """Hull vertices in counter-clockwise order; two points for a collinear set."""
    if pts.size <= 2:
        return pts
    xy = np.column_stack([pts.real, pts.imag])
    order = np.lexsort((xy[:, 1], xy[:, 0]))
    xy = xy[order]

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    scale = max(np.abs(xy).max(), 1e-300)
    lower, upper = [], []
    for p in xy:
        while len(lower) >= 2 and cross(lower[-2], lower[-1], p) <= 1e-13 * scale ** 2:
            lower.pop()
        lower.append(p)
    for p in xy[::-1]:
        while len(upper) >= 2 and cross(upper[-2], upper[-1], p) <= 1e-13 * scale ** 2:
            upper.pop()
        upper.append(p)
    hull = lower[:-1] + upper[:-1]
    return np.array([complex(x, y) for x, y in hull])


def _segment_samples(p, q, m):
    """``m`` points from p to q (both included), clustered towards both ends."""
    t = (1 - np.cos(np.linspace(0, np.pi, m))) / 2
    return p + t * (q - p)


def _resample(vertices, breakpoints, P):
    """Resample a hull boundary (or a segment) to roughly ``P`` points."""
    if vertices.size == 2:
        a, c = vertices
        d = c - a
        t = np.real((breakpoints - a) * np.conj(d)) / abs(d) ** 2
        t = np.unique(np.clip(np.concatenate([[0.0, 1.0], t]), 0.0, 1.0))
        nodes = a + t * d
    else:
        nodes = np.append(vertices, vertices[0])
    gaps = nodes.size - 1
    # a hull that already has about P vertices (curved boundary) is kept as is;
    # points on its chords would lie strictly inside the field of values
    m = max(2, int(round(P / gaps)) + 1)
    pieces = [_segment_samples(nodes[i], nodes[i + 1], m)[:-1] for i in range(gaps)]
    pieces.append(nodes[-1:])
    return np.concatenate(pieces)


def _is_hermitian(M, tol=1e-10):
    return np.linalg.norm(M - M.conj().T) <= tol * max(np.linalg.norm(M), 1e-300)


def fov_boundary(A_proj, bounds=None, P=200):
    """Samples of the boundary of the field of values of a small dense matrix.

    The rotated-Hermitian-part sweep over ``P`` angles gives boundary points;
    their convex hull (joined with the optional ``bounds`` points) is
    resampled with about ``P`` points.  For a Hermitian matrix the field of
    values is the spectral interval; its eigenvalues are used as breakpoints.
    """
    if P < 8:
        raise ValueError('need at least 8 samples')
    M = np.asarray(A_proj, dtype=complex)
    if M.ndim != 2 or M.shape[0] != M.shape[1] or M.shape[0] == 0:
        raise FovEstimationFailed(f'expected a non-empty square matrix, got {M.shape}')
    ritz = np.linalg.eigvals(M)
    if _is_hermitian(M):
        ev = np.linalg.eigvalsh((M + M.conj().T) / 2)
        pts = np.array([ev[0], ev[-1]], dtype=complex)
        ritz = ev.astype(complex)
    else:
        pts = _rayleigh_sweep(M, 2 * np.pi * np.arange(P) / P)
    return _boundary_from_points(pts, ritz, bounds, P, FovProvenance.ROTATED_SWEEP)


def _boundary_from_points(pts, ritz, bounds, P, provenance):
    if bounds is not None:
        pts = np.concatenate([pts, np.asarray(bounds, dtype=complex).ravel()])
        provenance = FovProvenance.USER_BOUNDS if provenance is None else provenance
    pts = pts[np.isfinite(pts)]
    if pts.size == 0:
        raise FovEstimationFailed('no finite boundary points')
    hull = _convex_hull(_dedupe(pts))
    if hull.size == 1:
        r = max(abs(hull[0]), 1.0) * 1e-8
        hull = np.array([hull[0] - r, hull[0] + r])
    return FovBoundarySamples(_resample(hull, ritz, P), provenance)


def ritz_hull(ritz, bounds=None, P=200):
    """Candidate set from the convex hull of Ritz values (and optional bounds)."""
    ritz = np.asarray(ritz, dtype=complex).ravel()
    return _boundary_from_points(ritz, ritz, bounds, P, FovProvenance.RITZ_HULL)


def _hermitian_tridiagonal_extreme(d, e):
    """Largest eigenpair of the Hermitian tridiagonal matrix with diagonal d (real)
    and subdiagonal e (complex)."""
    ae = np.abs(e)
    # diagonal unitary similarity making the off-diagonal real nonnegative
    phase = np.ones(d.size, dtype=complex)
    with np.errstate(invalid='ignore', divide='ignore'):
        ph = np.where(ae > 0, e / np.where(ae > 0, ae, 1), 1.0)
    phase[1:] = np.cumprod(ph)
    n = d.size
    w, q = spla.eigh_tridiagonal(d, ae, select='i', select_range=(n - 1, n - 1))
    return w[0], phase * q[:, 0]


def fov_boundary_operator(A, P=200, bounds=None):
    """Field-of-values boundary samples of a full operator.

    Tridiagonal (banded with one sub/superdiagonal) operators use a
    tridiagonal eigensolver per angle; dense ones a dense one; other
    operators the Lanczos method on the rotated Hermitian part.
    """
    angles = 2 * np.pi * np.arange(P) / P
    if not isinstance(A, np.ndarray):
        A = as_operator(A)
    if isinstance(A, BandedOperator) and A.l <= 1 and A.u <= 1:
        n = A.n
        ab = np.zeros((3, n), dtype=complex)
        ab[1 - A.u:2 + A.l] = A.ab
        sup, dia, sub = ab[0, 1:], ab[1], ab[2, :-1]
        if np.allclose(sup, np.conj(sub), rtol=1e-14, atol=0) and np.allclose(dia.imag, 0):
            # |sub| gives a unitarily similar real tridiagonal matrix
            lo = spla.eigh_tridiagonal(dia.real, np.abs(sub), select='i', select_range=(0, 0),
                                       eigvals_only=True)[0]
            hi = spla.eigh_tridiagonal(dia.real, np.abs(sub), select='i',
                                       select_range=(n - 1, n - 1), eigvals_only=True)[0]
            pts = np.array([lo, hi], dtype=complex)
            return _boundary_from_points(pts, pts, bounds, P, FovProvenance.ROTATED_SWEEP)
        pts = np.empty(P, dtype=complex)
        for j, t in enumerate(angles):
            e = np.exp(1j * t)
            d = np.real(e * dia)
            s = (e * sub + np.conj(e) * np.conj(sup)) / 2
            _, q = _hermitian_tridiagonal_extreme(d, s)
            Aq = A.matvec(q[:, None])[:, 0]
            pts[j] = np.vdot(q, Aq) / np.vdot(q, q)
        return _boundary_from_points(pts, pts, bounds, P, FovProvenance.ROTATED_SWEEP)
    if isinstance(A, DenseOperator) or isinstance(A, np.ndarray):
        M = A.todense() if isinstance(A, Operator) else np.asarray(A, dtype=complex)
        return fov_boundary(M, bounds=bounds, P=P)
    pts = np.empty(P, dtype=complex)
    AH = A.adjoint()
    for j, t in enumerate(angles):
        e = np.exp(1j * t)
        op = spsla.LinearOperator(
            A.shape, dtype=complex,
            matvec=lambda x, e=e: ((e * A.matvec(x[:, None]) + np.conj(e) * AH.matvec(x[:, None])) / 2)[:, 0])
        try:
            _, q = spsla.eigsh(op, k=1, which='LA')
        except spsla.ArpackError as exc:
            raise FovEstimationFailed(f'Lanczos failed at angle {t:.3f}') from exc
        q = q[:, 0]
        pts[j] = np.vdot(q, A.matvec(q[:, None])[:, 0]) / np.vdot(q, q)
    return _boundary_from_points(pts, pts, bounds, P, FovProvenance.ROTATED_SWEEP)


def _check(ctx, candidates):
    lam = np.asarray(getattr(candidates, 'points', candidates), dtype=complex).ravel()
    ritz = np.asarray(ctx.ritz, dtype=complex).ravel()
    if lam.size == 0:
        raise InvalidContext('empty candidate set')
    if ritz.size == 0:
        raise InvalidContext('empty Ritz set')
    return lam, ritz


def adm_objective(ctx, lam):
    """Log of ``prod |lam - conj(xi)|^b / prod |lam - conj(mu)|`` for each candidate."""
    lam = np.atleast_1d(np.asarray(lam, dtype=complex))
    xi = ctx.finite_poles()
    ritz = np.asarray(ctx.ritz, dtype=complex).ravel()
    with np.errstate(divide='ignore'):
        num = ctx.block_size * np.log(np.abs(lam[:, None] - np.conj(xi)[None])).sum(axis=1)
        den = np.log(np.abs(lam[:, None] - np.conj(ritz)[None])).sum(axis=1)
    out = num - den
    out[np.isneginf(den)] = np.inf
    return out


def sadm_objective(ctx, lam):
    """Log of ``prod |lam - conj(xi)| / prod_i |lam - conj(mu_{(i-1)b+1})|`` with the Ritz
    values sorted by distance to ``conj(lam)`` for each candidate."""
    lam = np.atleast_1d(np.asarray(lam, dtype=complex))
    xi = ctx.finite_poles()
    ritz = np.asarray(ctx.ritz, dtype=complex).ravel()
    dist = np.sort(np.abs(lam[:, None] - np.conj(ritz)[None]), axis=1)[:, ::ctx.block_size]
    with np.errstate(divide='ignore'):
        num = np.log(np.abs(lam[:, None] - np.conj(xi)[None])).sum(axis=1)
        den = np.log(dist).sum(axis=1)
    out = num - den
    out[np.isneginf(den)] = np.inf
    return out


def _argmax_pole(obj, lam):
    j = int(np.argmax(obj))
    return complex(np.conj(lam[j])), bool(np.isposinf(obj[j]))


def adm_next_pole(ctx, candidates, return_flag=False):
    """Conjugate of the ADM maximizer over the candidates (first index on ties)."""
    lam, _ = _check(ctx, candidates)
    pole, hit = _argmax_pole(adm_objective(ctx, lam), lam)
    return (pole, hit) if return_flag else pole


def sadm_next_pole(ctx, candidates, return_flag=False):
    lam, _ = _check(ctx, candidates)
    pole, hit = _argmax_pole(sadm_objective(ctx, lam), lam)
    return (pole, hit) if return_flag else pole


@dataclass
class FovOptions:
    """How candidate sets are obtained.

    ``source='projected'`` uses the field of values of the current projected
    matrix; ``'operator'`` computes the one of the full operator once.
    ``bounds_A`` / ``bounds_B`` are extra points (e.g. spectral interval ends)
    joined to the boundary of W(A) and W(B^H) respectively.
    """

    samples: int = 200
    source: str = 'projected'
    bounds_A: object = None
    bounds_B: object = None


class PoleStrategy:
    """Stateful generator of pole pairs for one solve.

    With ``pair_conjugates`` a non-real pole is followed by its conjugate on
    the next call, for the same space.
    """

    name = 'base'

    def __init__(self, pair_conjugates=False):
        self.pair_conjugates = pair_conjugates
        self._pending = [None, None]
        self.trace = []

    def reset(self):
        self._pending = [None, None]
        self.trace = []

    def _select(self, state):
        raise NotImplementedError

    def next(self, state):
        pending = list(self._pending)
        if self.pair_conjugates and pending[0] is not None and pending[1] is not None:
            self._pending = [None, None]
            return pending[0], pending[1]
        xa, xb = self._select(state)
        if pending[0] is not None:
            xa = pending[0]
        if pending[1] is not None:
            xb = pending[1]
        self._pending = [None, None]
        if self.pair_conjugates:
            for i, x in enumerate((xa, xb)):
                if pending[i] is None and not is_inf(x) and abs(x.imag) > 1e-14 * abs(x):
                    self._pending[i] = complex(np.conj(x))
        return xa, xb


class AdaptiveStrategy(PoleStrategy):
    """ADM (``kind='adm'``) or sADM (``kind='sadm'``) selection."""

    def __init__(self, kind='adm', fov=None, pair_conjugates=False):
        super().__init__(pair_conjugates)
        if kind not in ('adm', 'sadm'):
            raise ValueError(f'unknown adaptive rule {kind!r}')
        self.kind = kind
        self.name = kind.upper() if kind == 'adm' else 'sADM'
        self.fov = fov or FovOptions()
        self._operator_fov = {}

    def _candidates(self, state, which):
        # which='A': boundary of W(A) (used for the B^H space), 'B': of W(B^H)
        bounds = self.fov.bounds_A if which == 'A' else self.fov.bounds_B
        if self.fov.source == 'operator':
            if which not in self._operator_fov:
                op = state.problem.A if which == 'A' else state.problem.Bh
                self._operator_fov[which] = fov_boundary_operator(op, P=self.fov.samples,
                                                                  bounds=bounds)
            return self._operator_fov[which]
        M = state.A_h if which == 'A' else state.B_k.conj().T
        return fov_boundary(M, bounds=bounds, P=self.fov.samples)

    def _select(self, state):
        rule = adm_next_pole if self.kind == 'adm' else sadm_next_pole
        b = state.brad_A.block_size
        ctx_A = PoleContext(state.brad_A.finite_poles(), np.linalg.eigvals(state.A_h), b)
        ctx_B = PoleContext(state.brad_B.finite_poles(), np.linalg.eigvals(state.B_k.conj().T), b)
        xb, hit_b = rule(ctx_B, self._candidates(state, 'A'), return_flag=True)
        xa, hit_a = rule(ctx_A, self._candidates(state, 'B'), return_flag=True)
        if hit_a or hit_b:
            self.trace.append(('candidate on conjugated Ritz value', xa, xb))
        return xa, xb


class ExtendedStrategy(PoleStrategy):
    """Alternates poles 0 and infinity in both spaces."""

    name = 'ext'

    def __init__(self):
        super().__init__(False)
        self._it = cycle([0j, INF])

    def reset(self):
        super().reset()
        self._it = cycle([0j, INF])

    def _select(self, state):
        x = next(self._it)
        return x, x


class FixedStrategy(PoleStrategy):
    """Cycles through user-given pole lists."""

    name = 'fixed'

    def __init__(self, poles_A, poles_B=None, pair_conjugates=False):
        super().__init__(pair_conjugates)
        self.poles_A = [complex(p) for p in poles_A]
        self.poles_B = [complex(p) for p in (poles_B if poles_B is not None else poles_A)]
        if not self.poles_A or not self.poles_B:
            raise ValueError('fixed pole lists must be non-empty')
        self.reset()

    def reset(self):
        super().reset()
        self._ia, self._ib = cycle(self.poles_A), cycle(self.poles_B)

    def _select(self, state):
        return next(self._ia), next(self._ib)


def make_strategy(name, fov=None, fixed_poles=None, pair_conjugates=False):
    name = name.lower() if isinstance(name, str) else name
    if isinstance(name, PoleStrategy):
        return name
    if name in ('adm', 'sadm'):
        return AdaptiveStrategy(name, fov=fov, pair_conjugates=pair_conjugates)
    if name in ('ext', 'extended'):
        return ExtendedStrategy()
    if name == 'fixed':
        if fixed_poles is None:
            raise ValueError('fixed strategy needs a pole list')
        if isinstance(fixed_poles, tuple) and len(fixed_poles) == 2 and not np.isscalar(fixed_poles[0]):
            return FixedStrategy(fixed_poles[0], fixed_poles[1], pair_conjugates)
        return FixedStrategy(fixed_poles, pair_conjugates=pair_conjugates)
    raise ValueError(f'unknown pole strategy {name!r}')


def next_pole_pair(strategy, state):
    """Next ``(xi_A, xi_B)`` for the A-space and the B^H-space."""
    return strategy.next(state)
