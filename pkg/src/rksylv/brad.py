"""Block rational Arnoldi decompositions (BRADs).

A BRAD of order k is a relation ``A V K = V H`` with ``V`` of size
``n x b(k+1)`` with orthonormal columns and ``K, H`` block upper Hessenberg of
size ``b(k+1) x bk``.  Subdiagonal block ``i`` encodes the pole ``xi_i``
through ``xi_i K[i+1, i] = H[i+1, i]`` (``K[i+1, i] = 0`` for an infinite
pole).  States are immutable; :func:`extend` and
:func:`reorder_last_pole_to_inf` return new ones.
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg as spla

from .errors import (InvalidBrad, LuckyBreakdown, NeedsInfinityPole,
                     RankDeficientStart, ReorderPrecondition)
from .operators import as_operator

__all__ = ['BradState', 'INF', 'is_inf', 'init', 'extend', 'reorder_last_pole_to_inf',
           'projected_matrix', 'brad_residual', 'orthonormality_error', 'subdiagonal_poles']

INF = complex(np.inf, 0.0)

BREAKDOWN_TOL = 1e-14
RANK_TOL = 1e-14
# relative size of K[k, k-1] still accepted as "zero" by the pole swap
REORDER_TOL = 1e-10


def is_inf(xi):
    return bool(np.isinf(xi))


def _frozen(a):
    a = np.asarray(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class BradState:
    V: np.ndarray
    K: np.ndarray
    H: np.ndarray
    poles: tuple
    xi0: complex
    block_size: int
    start: np.ndarray
    start_coords: np.ndarray

    @property
    def order(self):
        return len(self.poles)

    @property
    def n(self):
        return self.V.shape[0]

    def basis(self, j=None):
        """First ``j`` block columns of V (all of them by default)."""
        if j is None:
            return self.V
        return self.V[:, :j * self.block_size]

    def finite_poles(self, include_start=True):
        ps = ((self.xi0,) if include_start else ()) + self.poles
        return tuple(p for p in ps if not is_inf(p))

    def space_poles(self):
        """Poles of the space spanned by the leading ``bk`` columns."""
        return (self.xi0,) + self.poles[:-1]


def _orthonormal_start(A, V0, xi0):
    V0 = np.asarray(V0, dtype=complex)
    if V0.ndim == 1:
        V0 = V0[:, None]
    if is_inf(xi0):
        w = V0
    else:
        w = A.solve_shifted(xi0, V0)
    Q, R = np.linalg.qr(w)
    s = np.linalg.svd(R, compute_uv=False)
    if s[0] == 0 or s[-1] < RANK_TOL * s[0]:
        raise RankDeficientStart(f'starting block has numerical rank below {V0.shape[1]}')
    return V0, Q, R


def init(A, V0, xi0=INF):
    """Order-0 state: orthonormal basis of ``(I - A/xi0)^{-1} V0`` (``A/inf = 0``)."""
    A = as_operator(A)
    xi0 = complex(xi0)
    V0, Q, R = _orthonormal_start(A, V0, xi0)
    b = V0.shape[1]
    coords = R if is_inf(xi0) else Q.conj().T @ V0
    empty = np.zeros((b, 0), dtype=complex)
    return BradState(_frozen(Q), _frozen(empty), _frozen(empty.copy()), (), xi0, b,
                     _frozen(V0), _frozen(coords))


def _block_orth(V, w):
    """Orthonormalize ``w`` against ``V``: ``w = V c + Q R``.

    Two rounds of (project, QR).  The second round on the normalized ``Q``
    recovers orthogonality lost when ``w`` is nearly inside ``span(V)``.
    """
    c = V.conj().T @ w
    Q, R = np.linalg.qr(w - V @ c)
    c2 = V.conj().T @ Q
    Q, R2 = np.linalg.qr(Q - V @ c2)
    return c + c2 @ R, Q, R2 @ R


def extend(state, A, xi):
    """Add one block column using pole ``xi``.

    A finite pole uses the shift-and-invert step ``w = (A - xi I)^{-1} v_k``,
    an infinite one ``w = A v_k``; ``v_k`` is the last block column.
    """
    A = as_operator(A)
    xi = complex(xi)
    b = state.block_size
    k = state.order
    V = state.V
    vk = V[:, -b:]
    w = A.matvec(vk) if is_inf(xi) else A.solve_shifted(xi, vk)
    wnorm = np.linalg.norm(w)
    c, Q, R = _block_orth(V, w)
    s = np.linalg.svd(R, compute_uv=False)
    if not np.isfinite(wnorm) or s[-1] < BREAKDOWN_TOL * wnorm:
        raise LuckyBreakdown(f'breakdown at order {k + 1} (sigma_min = {s[-1]:.2e})', order=k + 1)
    col = np.vstack([c, R])
    ek = np.zeros_like(col)
    ek[k * b:(k + 1) * b] = np.eye(b)
    if is_inf(xi):
        kcol, hcol = ek, col
    else:
        # unit-norm K column; keeps K_k well scaled when poles of very
        # different magnitude are mixed by the reordering
        s = 1.0 / np.linalg.norm(col)
        kcol, hcol = s * col, s * (xi * col + ek)
    rows = b * (k + 2)
    K = np.zeros((rows, b * (k + 1)), dtype=complex)
    H = np.zeros_like(K)
    K[:rows - b, :k * b] = state.K
    H[:rows - b, :k * b] = state.H
    K[:, k * b:] = kcol
    H[:, k * b:] = hcol
    coords = np.vstack([state.start_coords, Q.conj().T @ state.start])
    return BradState(_frozen(np.hstack([V, Q])), _frozen(K), _frozen(H), state.poles + (xi,),
                     state.xi0, b, state.start, _frozen(coords))


def reorder_last_pole_to_inf(state):
    """Swap the last two poles ``(..., inf, xi) -> (..., xi, inf)`` by unitary transformations.

    Only the last two block columns of V change.  A state whose last pole is
    already infinite is returned unchanged.
    """
    k = state.order
    b = state.block_size
    if k == 0 or is_inf(state.poles[-1]):
        return state
    if k < 2 or not is_inf(state.poles[-2]):
        raise ReorderPrecondition('the second-to-last pole must be infinite')
    K = np.array(state.K)
    H = np.array(state.H)
    rk = slice((k - 1) * b, (k + 1) * b)      # block rows k, k+1
    ck = slice((k - 2) * b, k * b)            # block columns k-1, k
    if np.linalg.norm(K[(k - 1) * b:k * b, (k - 2) * b:(k - 1) * b]) > REORDER_TOL * np.linalg.norm(K):
        raise ReorderPrecondition('K[k, k-1] is not zero although the pole is infinite')
    Q1, _ = np.linalg.qr(K[rk, (k - 1) * b:k * b], mode='complete')
    M = Q1.conj().T @ H[rk, ck]
    _, Q2 = spla.rq(M[b:], mode='full')
    K[rk] = Q1.conj().T @ K[rk]
    H[rk] = Q1.conj().T @ H[rk]
    K[:, ck] = K[:, ck] @ Q2.conj().T
    H[:, ck] = H[:, ck] @ Q2.conj().T
    K[k * b:, (k - 2) * b:] = 0.0
    H[k * b:, (k - 2) * b:(k - 1) * b] = 0.0
    V = np.array(state.V)
    V[:, rk] = V[:, rk] @ Q1
    coords = np.array(state.start_coords)
    coords[rk] = Q1.conj().T @ coords[rk]
    poles = state.poles[:-2] + (state.poles[-1], state.poles[-2])
    return BradState(_frozen(V), _frozen(K), _frozen(H), poles, state.xi0, b,
                     state.start, _frozen(coords))


def head(state):
    """Leading ``bk x bk`` blocks ``(K_k, H_k)``."""
    m = state.order * state.block_size
    return state.K[:m], state.H[:m]


def projected_matrix(state):
    """``A_k = H_k K_k^{-1} = V_k^H A V_k``; requires the last pole to be infinite."""
    if state.order == 0:
        raise InvalidBrad('order-0 decomposition has no projected matrix')
    if not is_inf(state.poles[-1]):
        raise NeedsInfinityPole('projected_matrix needs a trailing infinite pole')
    Kk, Hk = head(state)
    s = np.linalg.svd(Kk, compute_uv=False)
    if s[-1] <= 1e-14 * s[0]:
        raise InvalidBrad('K_k is singular')
    return np.linalg.solve(Kk.T, Hk.T).T


def brad_residual(state, A):
    """``||A V K - V H||_F``."""
    A = as_operator(A)
    return float(np.linalg.norm(A.matvec(state.V @ state.K) - state.V @ state.H))


def orthonormality_error(state):
    V = state.V
    return float(np.linalg.norm(V.conj().T @ V - np.eye(V.shape[1])))


def subdiagonal_poles(state, tol=1e-8):
    """Poles read off the subdiagonal blocks; raises if a pair is not proportional."""
    b = state.block_size
    out = []
    scale = max(np.linalg.norm(state.K), np.linalg.norm(state.H))
    for i in range(state.order):
        Ks = state.K[(i + 1) * b:(i + 2) * b, i * b:(i + 1) * b]
        Hs = state.H[(i + 1) * b:(i + 2) * b, i * b:(i + 1) * b]
        nk, nh = np.linalg.norm(Ks), np.linalg.norm(Hs)
        if nk <= tol * max(nh, 1e-300) or nk <= 1e-15 * scale:
            out.append(INF)
            continue
        xi = np.vdot(Ks, Hs) / np.vdot(Ks, Ks)
        if np.linalg.norm(Hs - xi * Ks) > tol * max(nh, abs(xi) * nk):
            raise InvalidBrad(f'subdiagonal block {i} is not rank-1 proportional')
        out.append(complex(xi))
    return out
