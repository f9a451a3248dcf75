"""Galerkin solver for ``A X - X B = u v^H`` on block rational Krylov spaces.

The left space is generated by ``(A, u)``, the right one by ``(B^H, v)``.
Both grow by one block per iteration.  After each extension the new finite
pole is swapped forward so the trailing pole is infinite again; the
projected matrices then come from the small pencils and the residual norm is
available without touching ``A`` or ``B``.
"""

import enum
import time
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as spla
from scipy.linalg.lapack import ztrsyl

from . import brad as _brad
from .brad import INF, is_inf
from .errors import (DimensionMismatch, LuckyBreakdown, NeedsInfinityPole,
                     ProjectedSpectraOverlap)
from .matpoly import (RationalMatrixFunction, ScalarDenominator, apply_rational,
                      apply_rational_inv, block_char_poly, limit_at_infinity)
from .operators import Operator, as_operator

__all__ = ['SylvesterProblem', 'SolveOptions', 'LowRankSolution', 'SylvesterState',
           'Status', 'solve', 'projected_solve', 'residual_norm_cheap',
           'relative_residual', 'residual_decomposition', 'galerkin_state']


def _block(x, name):
    x = np.asarray(x)
    if x.ndim == 1:
        x = x[:, None]
    if x.ndim != 2:
        raise DimensionMismatch(f'{name} must be a block vector, got shape {x.shape}')
    return x.astype(complex)


class SylvesterProblem:
    """``A X - X B = u v^H``.

    ``A`` and ``B`` may be dense arrays, scipy sparse matrices or
    :class:`~rksylv.operators.Operator` instances.  ``Bh`` is the adjoint
    operator used to build the right space.
    """

    def __init__(self, A, B, u, v):
        self.A = as_operator(A)
        self.B = as_operator(B)
        self.Bh = self.B.adjoint()
        self.u = _block(u, 'u')
        self.v = _block(v, 'v')
        if self.A.shape[0] != self.u.shape[0]:
            raise DimensionMismatch(f'A is {self.A.shape} but u has {self.u.shape[0]} rows')
        if self.B.shape[0] != self.v.shape[0]:
            raise DimensionMismatch(f'B is {self.B.shape} but v has {self.v.shape[0]} rows')
        if self.u.shape[1] != self.v.shape[1]:
            raise DimensionMismatch('u and v must have the same number of columns')

    @property
    def n(self):
        return self.A.shape[0]

    @property
    def m(self):
        return self.B.shape[0]

    @property
    def block_size(self):
        return self.u.shape[1]

    def rhs_norm(self):
        """``||u v^H||_F`` computed from the small Gram matrices."""
        g = np.trace((self.u.conj().T @ self.u) @ (self.v.conj().T @ self.v)).real
        return float(np.sqrt(max(g, 0.0)))


@dataclass
class SolveOptions:
    """Solver settings.

    ``pole_strategy`` is one of ``'adm'``, ``'sadm'``, ``'ext'``, ``'fixed'``
    or a :class:`~rksylv.poles.PoleStrategy` instance.  ``fixed_poles`` is a
    list (used for both spaces) or a pair of lists.
    """

    tol: float = 1e-8
    max_iter: int = 100
    pole_strategy: object = 'adm'
    fixed_poles: object = None
    fov: object = None
    pair_conjugates: bool = False
    trace: bool = False

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError('tol must be positive')
        if int(self.max_iter) < 1:
            raise ValueError('max_iter must be at least 1')


class Status(enum.Enum):
    CONVERGED = 'converged'
    NOT_CONVERGED = 'not converged'
    INVARIANT = 'invariant subspace found'


@dataclass(eq=False)
class SylvesterState:
    problem: SylvesterProblem
    brad_A: object
    brad_B: object
    A_h: np.ndarray = None
    B_k: np.ndarray = None
    u_proj: np.ndarray = None
    v_proj: np.ndarray = None
    Y: np.ndarray = None
    residual: float = np.nan
    history: list = field(default_factory=list)
    # bases used when a breakdown ended the iteration
    explicit_bases: tuple = None

    @property
    def order(self):
        return self.brad_A.order

    @property
    def U(self):
        return self.brad_A.basis(self.brad_A.order)

    @property
    def V(self):
        return self.brad_B.basis(self.brad_B.order)


@dataclass(eq=False)
class LowRankSolution:
    """``X ~ U Y V^H``."""

    U: np.ndarray
    Y: np.ndarray
    V: np.ndarray
    residual: float
    poles_A: tuple
    poles_B: tuple
    iterations: int
    status: Status

    @property
    def converged(self):
        return self.status is not Status.NOT_CONVERGED

    @property
    def not_converged(self):
        return self.status is Status.NOT_CONVERGED

    def todense(self):
        return self.U @ self.Y @ self.V.conj().T


def projected_solve(A_h, B_k, C, sep_tol=1e-13):
    """Solve ``A_h Y - Y B_k = C`` by the Bartels-Stewart method.

    Both matrices are reduced to complex Schur form and the triangular
    equation is solved with LAPACK ``trsyl``.
    """
    A_h = np.atleast_2d(np.asarray(A_h, dtype=complex))
    B_k = np.atleast_2d(np.asarray(B_k, dtype=complex))
    C = np.atleast_2d(np.asarray(C, dtype=complex))
    if C.shape != (A_h.shape[0], B_k.shape[0]):
        raise DimensionMismatch(f'C is {C.shape}, expected {(A_h.shape[0], B_k.shape[0])}')
    TA, ZA = spla.schur(A_h, output='complex')
    TB, ZB = spla.schur(B_k, output='complex')
    la, lb = np.diag(TA), np.diag(TB)
    gap = np.abs(la[:, None] - lb[None, :]).min()
    scale = max(np.abs(la).max(), np.abs(lb).max(), 1e-300)
    if gap <= sep_tol * scale:
        raise ProjectedSpectraOverlap(f'projected spectra are {gap:.2e} apart')
    F = ZA.conj().T @ C @ ZB
    Yt, s, info = ztrsyl(TA, TB, F, isgn=-1)
    if info < 0:
        raise ValueError(f'trsyl: illegal argument {-info}')
    if info == 1:
        raise ProjectedSpectraOverlap('trsyl perturbed eigenvalues: spectra too close')
    return ZA @ (Yt / s) @ ZB.conj().T


def _needs_inf(st):
    if st.order == 0 or not is_inf(st.poles[-1]):
        raise NeedsInfinityPole('the residual formula needs a trailing infinite pole')


def _residual_core(state):
    bA, bB = state.brad_A, state.brad_B
    _needs_inf(bA)
    _needs_inf(bB)
    KA, _ = _brad.head(bA)
    KB, _ = _brad.head(bB)
    Y = state.Y
    # H_A K_A^{-1} Y and Y K_B^{-H} H_B^H
    left = bA.H @ np.linalg.solve(KA, Y)
    right = (bB.H @ np.linalg.solve(KB, Y.conj().T)).conj().T
    M = -bA.start_coords @ bB.start_coords.conj().T
    M[:, :left.shape[1]] += left
    M[:right.shape[0], :] -= right
    return M


def residual_norm_cheap(state):
    """``||A U Y V^H - U Y V^H B - u v^H||_F`` from the small pencils only.

    With a trailing infinite pole, ``A U_h = U_{h+1} H K^{-1}`` and ``u`` lies
    in the span of ``U_{h+1}``, so the residual equals
    ``U_{h+1} M V_{k+1}^H`` with a small ``M``.  For ``xi0 = inf`` the nonzero
    part of ``M`` is its last block row and column.
    """
    return float(np.linalg.norm(_residual_core(state)))


def relative_residual(state):
    return residual_norm_cheap(state) / state.problem.rhs_norm()


def _project(state):
    A_h = _brad.projected_matrix(state.brad_A)
    B_k = _brad.projected_matrix(state.brad_B).conj().T
    h = A_h.shape[0]
    k = B_k.shape[0]
    u_proj = state.brad_A.start_coords[:h]
    v_proj = state.brad_B.start_coords[:k]
    Y = projected_solve(A_h, B_k, u_proj @ v_proj.conj().T)
    state.A_h, state.B_k, state.u_proj, state.v_proj, state.Y = A_h, B_k, u_proj, v_proj, Y
    state.residual = residual_norm_cheap(state)
    return state


def _deflated_closure(op, V, xi, b, tol=1e-12):
    """Extend ``V`` by the numerically independent parts of successive blocks.

    The first block uses the pending pole ``xi``, later ones multiply the
    directions just added by the operator, until nothing new appears.
    """
    last = V[:, -b:]
    while last.shape[1]:
        w = op.matvec(last) if is_inf(xi) else op.solve_shifted(xi, last)
        xi = INF
        nw = np.linalg.norm(w)
        for _ in range(2):
            w = w - V @ (V.conj().T @ w)
        Uw, s, _ = np.linalg.svd(w, full_matrices=False)
        Q = Uw[:, s > tol * max(nw, 1e-300)]
        Q, _ = np.linalg.qr(Q - V @ (V.conj().T @ Q))
        V = np.hstack([V, Q])
        last = Q
    return V


def _explicit_finish(state, xa, xb):
    """Galerkin solution after a breakdown.

    The current bases are closed under the operators (with deflation);
    projections and residual are then formed explicitly.
    """
    p = state.problem
    b = p.block_size
    U = _deflated_closure(p.A, state.brad_A.V, xa, b)
    W = _deflated_closure(p.Bh, state.brad_B.V, xb, b)
    A_h = U.conj().T @ p.A.matvec(U)
    BhW = p.Bh.matvec(W)
    B_k = (W.conj().T @ BhW).conj().T
    u_proj = U.conj().T @ p.u
    v_proj = W.conj().T @ p.v
    Y = projected_solve(A_h, B_k, u_proj @ v_proj.conj().T)
    # R = [A U, U, u] [Y W^H; -Y (B^H W)^H; -v^H]
    L = np.hstack([p.A.matvec(U @ Y), U @ Y, p.u])
    Rt = np.hstack([W, BhW, p.v])
    _, RL = np.linalg.qr(L)
    _, RR = np.linalg.qr(Rt)
    c = Y.shape[1]
    mid = -np.eye(L.shape[1], dtype=complex)
    mid[:c, :c] = np.eye(c)
    state.A_h, state.B_k, state.u_proj, state.v_proj, state.Y = A_h, B_k, u_proj, v_proj, Y
    state.residual = float(np.linalg.norm(RL @ mid @ RR.conj().T))
    state.explicit_bases = (U, W)
    return state


def _record(state, it, xa, xb, t0):
    state.history.append({'iteration': it,
                          'order': state.order,
                          'residual': state.residual,
                          'relative_residual': state.residual / state.problem.rhs_norm(),
                          'pole_A': complex(xa), 'pole_B': complex(xb),
                          'time': time.perf_counter() - t0})


def _solution(state, it, status):
    if state.explicit_bases is not None:
        U, V = state.explicit_bases
    else:
        U, V = state.U, state.V
    return LowRankSolution(U, state.Y, V, state.residual / state.problem.rhs_norm(),
                           state.brad_A.poles, state.brad_B.poles, it, status)


def solve(problem, opts=None):
    """Solve ``A X - X B = u v^H``; returns ``(LowRankSolution, SylvesterState)``.

    The first iteration uses the pole ``inf`` in both spaces; later ones take
    their poles from the configured strategy.  A breakdown (invariant
    subspace) ends the iteration with the Galerkin solution on the bases
    built so far.
    """
    from .poles import make_strategy

    opts = opts or SolveOptions()
    p = problem
    rhs = p.rhs_norm()
    if rhs == 0:
        st = SylvesterState(p, None, None, Y=np.zeros((0, 0), dtype=complex), residual=0.0)
        sol = LowRankSolution(np.zeros((p.n, 0), dtype=complex), np.zeros((0, 0), dtype=complex),
                              np.zeros((p.m, 0), dtype=complex), 0.0, (), (), 0, Status.CONVERGED)
        return sol, st
    strategy = make_strategy(opts.pole_strategy, fov=opts.fov, fixed_poles=opts.fixed_poles,
                             pair_conjugates=opts.pair_conjugates)
    strategy.reset()
    t0 = time.perf_counter()
    state = SylvesterState(p, _brad.init(p.A, p.u), _brad.init(p.Bh, p.v))
    status = Status.NOT_CONVERGED
    it = 0
    while it < opts.max_iter:
        it += 1
        xa, xb = (INF, INF) if it == 1 else strategy.next(state)
        try:
            ba = _brad.extend(state.brad_A, p.A, xa)
            bb = _brad.extend(state.brad_B, p.Bh, xb)
        except LuckyBreakdown:
            _explicit_finish(state, xa, xb)
            _record(state, it, xa, xb, t0)
            status = (Status.INVARIANT if state.residual <= opts.tol * rhs
                      else Status.NOT_CONVERGED)
            break
        state.brad_A = _brad.reorder_last_pole_to_inf(ba)
        state.brad_B = _brad.reorder_last_pole_to_inf(bb)
        _project(state)
        _record(state, it, xa, xb, t0)
        if state.residual <= opts.tol * rhs:
            status = Status.CONVERGED
            break
    if opts.trace:
        state.trace = list(strategy.trace)
    return _solution(state, it, status), state


def galerkin_state(problem, poles_A, poles_B, xi0_A=INF, xi0_B=INF):
    """Galerkin state for explicitly given pole sequences (each ending in ``inf``).

    The decompositions are built directly in the given order, without
    reordering.
    """
    p = problem
    ba = _brad.init(p.A, p.u, xi0_A)
    for x in poles_A:
        ba = _brad.extend(ba, p.A, x)
    bb = _brad.init(p.Bh, p.v, xi0_B)
    for x in poles_B:
        bb = _brad.extend(bb, p.Bh, x)
    return _project(SylvesterState(p, ba, bb))


def _gram_norm(X, Y):
    """``||X Y^H||_F`` without forming the product."""
    g = np.trace((X.conj().T @ X) @ (Y.conj().T @ Y)).real
    return float(np.sqrt(max(g, 0.0)))


def _space_rational(chi, state):
    q = [x for x in state.space_poles() if not is_inf(x)]
    return RationalMatrixFunction(chi.poly, ScalarDenominator(tuple(q)))


def residual_decomposition(state):
    """Split the residual into the three terms of the block characteristic
    polynomial representation and return their norms.

    Dense-only diagnostic: needs well-conditioned characteristic polynomials
    of ``(A_h, u_proj)`` and ``(B_k^H, v_proj)``.
    """
    p = state.problem
    bA, bB = state.brad_A, state.brad_B
    U = state.U
    V = state.V
    A_h = state.A_h
    Bp = state.B_k.conj().T          # projection of B^H
    RA = _space_rational(block_char_poly(A_h, state.u_proj), bA)
    RB = _space_rational(block_char_poly(Bp, state.v_proj), bB)
    ra_u = apply_rational(RA, p.A, p.u)
    rb_v = apply_rational(RB, p.Bh, p.v)
    r12_l = U @ apply_rational_inv(RB.H, A_h, state.u_proj)
    r21_r = V @ apply_rational_inv(RA.H, Bp, state.v_proj)
    rho12 = _gram_norm(r12_l, rb_v)
    rho21 = _gram_norm(ra_u, r21_r)
    la, lb = limit_at_infinity(RA), limit_at_infinity(RB)
    if la is None or lb is None:
        rho22 = 0.0
    else:
        rho22 = _gram_norm(ra_u @ np.linalg.inv(la), rb_v @ np.linalg.inv(lb))
    return {'rho12_norm': rho12, 'rho21_norm': rho21, 'rho22_norm': rho22,
            'reconstructed_total': float(np.sqrt(rho12 ** 2 + rho21 ** 2 + rho22 ** 2)),
            'galerkin_A': float(np.linalg.norm(U.conj().T @ ra_u)),
            'RA_u_norm': float(np.linalg.norm(ra_u))}
