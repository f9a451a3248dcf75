"""Brute-force dense references for tests.

Nothing here calls the production routines it is meant to check: Sylvester
equations and inverse polynomial actions go through explicit Kronecker
systems, Krylov bases through explicit generators.
"""

import warnings

import numpy as np
import scipy.linalg as spla

from .errors import InvalidPolynomialOnSpectrum, RKSylvError, SizeGuard, SpectraOverlap

__all__ = ['dense_sylvester', 'dense_residual', 'dense_apply_kron', 'dense_apply_inv_kron',
           'dense_rational_krylov_basis', 'projector_distance', 'RankLoss']

SYLVESTER_LIMIT = 4096
KRON_LIMIT = 2048
KRYLOV_LIMIT = 256


class RankLoss(RKSylvError):
    """The explicit generators of a rational Krylov space are not independent."""


def _vec(X):
    return X.reshape(-1, order='F')


def _unvec(x, shape):
    return x.reshape(shape, order='F')


def _lu_solve_checked(M, rhs, exc, what):
    with warnings.catch_warnings():
        warnings.simplefilter('ignore', spla.LinAlgWarning)
        lu, piv = spla.lu_factor(M, check_finite=False)
    d = np.abs(np.diag(lu))
    if d.min() <= 1e3 * np.finfo(float).eps * max(d.max(), 1e-300):
        raise exc(f'{what} is singular')
    return spla.lu_solve((lu, piv), rhs, check_finite=False)


def dense_sylvester(A, B, C):
    """Solve ``A X - X B = C`` through ``(I kron A - B^T kron I) vec(X) = vec(C)``."""
    A = np.atleast_2d(np.asarray(A, dtype=complex))
    B = np.atleast_2d(np.asarray(B, dtype=complex))
    C = np.atleast_2d(np.asarray(C, dtype=complex))
    n, m = A.shape[0], B.shape[0]
    if n * m > SYLVESTER_LIMIT:
        raise SizeGuard(f'{n * m} unknowns exceed the oracle limit {SYLVESTER_LIMIT}')
    M = np.kron(np.eye(m), A) - np.kron(B.T, np.eye(n))
    x = _lu_solve_checked(M, _vec(C), SpectraOverlap, 'the Kronecker-sum matrix')
    return _unvec(x, (n, m))


def dense_residual(A, B, u, v, X):
    """``||A X - X B - u v^H||_F`` with everything dense."""
    A, B = np.asarray(A), np.asarray(B)
    return float(np.linalg.norm(A @ X - X @ B - u @ np.conj(v).T))


def _kron_matrix(coeffs, A):
    n = A.shape[0]
    M = np.zeros((n * coeffs.shape[1],) * 2, dtype=complex)
    Ai = np.eye(n, dtype=complex)
    for G in coeffs:
        M += np.kron(G.T, Ai)
        Ai = Ai @ A
    return M


def _coeffs(P):
    return np.asarray(getattr(P, 'coeffs', P), dtype=complex)


def dense_apply_kron(P, A, V):
    """``vec(P(A) o V) = (sum_i G_i^T kron A^i) vec(V)``."""
    c = _coeffs(P)
    A = np.asarray(A, dtype=complex)
    V = np.asarray(V, dtype=complex)
    if V.size > KRON_LIMIT:
        raise SizeGuard(f'nb = {V.size} exceeds {KRON_LIMIT}')
    return _unvec(_kron_matrix(c, A) @ _vec(V), V.shape)


def dense_apply_inv_kron(P, A, V):
    """Solve ``P(A) o W = V`` with the assembled Kronecker matrix."""
    c = _coeffs(P)
    A = np.asarray(A, dtype=complex)
    V = np.asarray(V, dtype=complex)
    if V.size > KRON_LIMIT:
        raise SizeGuard(f'nb = {V.size} exceeds {KRON_LIMIT}')
    w = _lu_solve_checked(_kron_matrix(c, A), _vec(V), InvalidPolynomialOnSpectrum,
                          'the Kronecker matrix of P(A)')
    return _unvec(w, V.shape)


def dense_rational_krylov_basis(A, V0, poles, xi0=np.inf, rank_tol=1e-10):
    """Orthonormal basis of the block rational Krylov space with the given poles.

    With ``k = len(poles) + 1`` the space is ``q(A)^{-1} span{A^i V0 : i < k}``
    where ``q(z)`` is the product of ``1 - z/xi`` over the finite values among
    ``xi0`` and the poles (``z`` for a zero pole).  This is the span of a BRAD
    of order ``len(poles)``.  Generators are formed explicitly with dense
    solves and orthonormalized by an SVD.
    """
    A = np.asarray(A, dtype=complex)
    V0 = np.atleast_2d(np.asarray(V0, dtype=complex))
    if V0.shape[0] != A.shape[0]:
        V0 = V0.T
    n, b = V0.shape
    if n > KRYLOV_LIMIT:
        raise SizeGuard(f'n = {n} exceeds {KRYLOV_LIMIT}')
    k = len(poles) + 1
    space = [xi0] + list(poles)
    W = V0.copy()
    I = np.eye(n)
    for xi in space[:k]:
        if np.isfinite(xi):
            W = np.linalg.solve(I - A / xi if xi != 0 else A, W)
    gens = [W]
    for _ in range(k - 1):
        gens.append(A @ gens[-1])
    G = np.hstack(gens)
    G = G / np.linalg.norm(G, axis=0)
    Uq, s, _ = np.linalg.svd(G, full_matrices=False)
    if s[-1] < rank_tol * s[0]:
        raise RankLoss(f'generators have numerical rank below {k * b}')
    return Uq


def projector_distance(U, W):
    """``||U U^H - W W^H||_2`` for orthonormal U, W."""
    return float(np.linalg.norm(U @ U.conj().T - W @ W.conj().T, 2))
