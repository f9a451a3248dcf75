"""Matrix polynomials, rational matrix functions with scalar denominator,
their action on block vectors and block characteristic polynomials.

A matrix polynomial ``P(z) = sum_i z^i G_i`` with ``b x b`` coefficients acts
on an ``n x b`` block vector from the right::

    P(A) o V = sum_i A^i V G_i

and ``P(A) o^{-1} V`` is the block vector ``W`` with ``P(A) o W = V``.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as spla
import scipy.sparse as sp

from .errors import (DimensionMismatch, IllConditionedCharPoly,
                     InvalidPolynomialOnSpectrum, PoleEvaluation,
                     SizeGuard)
from .operators import Operator, as_operator

__all__ = ['MatrixPolynomial', 'ScalarDenominator', 'RationalMatrixFunction',
           'apply', 'apply_inv', 'apply_rational', 'apply_rational_inv',
           'eval_at_scalar', 'limit_at_infinity', 'block_char_poly', 'is_solvent',
           'cauchy_quadrature_check', 'CharPoly']

# nb above which the dense inverse action refuses to run
DENSE_INV_LIMIT = 4096
# sigma_min(W_i) / sigma_max(W_i) below which a char-poly block is rejected
CHARPOLY_RCOND = 1e-10


def _readonly(a):
    a = np.array(a, dtype=complex)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class MatrixPolynomial:
    """``P(z) = sum_{i=0}^d z^i coeffs[i]`` with ``b x b`` complex coefficients."""

    coeffs: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=complex)
        if c.ndim == 2:
            c = c[None]
        if c.ndim != 3 or c.shape[0] == 0 or c.shape[1] != c.shape[2]:
            raise DimensionMismatch(f'coefficients must be a non-empty stack of square '
                                    f'matrices, got shape {c.shape}')
        object.__setattr__(self, 'coeffs', _readonly(c))

    @classmethod
    def identity(cls, b):
        return cls(np.eye(b)[None])

    @classmethod
    def monomial(cls, b, d):
        c = np.zeros((d + 1, b, b))
        c[d] = np.eye(b)
        return cls(c)

    @classmethod
    def linear(cls, S):
        """The monic linear polynomial ``z I - S``."""
        S = np.asarray(S)
        return cls(np.stack([-S, np.eye(S.shape[0])]))

    @property
    def block_size(self):
        return self.coeffs.shape[1]

    @property
    def degree(self):
        return self.coeffs.shape[0] - 1

    def monic(self):
        return bool(np.array_equal(self.coeffs[-1], np.eye(self.block_size)))

    def __call__(self, z):
        """Evaluate at a scalar ``z`` (Horner)."""
        out = self.coeffs[-1].copy()
        for G in self.coeffs[-2::-1]:
            out = z * out + G
        return out

    def __mul__(self, other):
        if isinstance(other, MatrixPolynomial):
            d1, d2 = self.degree, other.degree
            b = self.block_size
            c = np.zeros((d1 + d2 + 1, b, b), dtype=complex)
            for i in range(d1 + 1):
                for j in range(d2 + 1):
                    c[i + j] += self.coeffs[i] @ other.coeffs[j]
            return MatrixPolynomial(c)
        return NotImplemented

    def scale_by_scalar_poly(self, q):
        """Product with a scalar polynomial given by coefficients ``q`` (lowest degree first)."""
        q = np.asarray(q, dtype=complex)
        b = self.block_size
        c = np.zeros((self.degree + len(q), b, b), dtype=complex)
        for i, G in enumerate(self.coeffs):
            for j, qj in enumerate(q):
                c[i + j] += qj * G
        return MatrixPolynomial(c)

    def conj(self):
        return MatrixPolynomial(self.coeffs.conj())

    @property
    def H(self):
        return MatrixPolynomial(np.conj(np.swapaxes(self.coeffs, 1, 2)))


@dataclass(frozen=True, eq=False)
class ScalarDenominator:
    """``Q(z) = prod_j (z - roots[j])``; an empty root list means ``Q = 1``."""

    roots: tuple = ()

    def __post_init__(self):
        r = tuple(complex(x) for x in self.roots if not np.isinf(x))
        object.__setattr__(self, 'roots', r)

    @property
    def degree(self):
        return len(self.roots)

    def __call__(self, z):
        return complex(np.prod([z - r for r in self.roots])) if self.roots else 1.0 + 0j

    def coefficients(self):
        """Coefficients of Q, lowest degree first."""
        return np.poly(self.roots)[::-1] if self.roots else np.ones(1, dtype=complex)

    def conj(self):
        return ScalarDenominator(tuple(np.conj(self.roots)))


@dataclass(frozen=True, eq=False)
class RationalMatrixFunction:
    """``R(z) = P(z) / Q(z)`` with matrix numerator and scalar denominator."""

    numerator: MatrixPolynomial
    denominator: ScalarDenominator = field(default_factory=ScalarDenominator)

    @property
    def block_size(self):
        return self.numerator.block_size

    def conj(self):
        """``R-bar``: conjugated coefficients and roots."""
        return RationalMatrixFunction(self.numerator.conj(), self.denominator.conj())

    @property
    def H(self):
        """``R^H``: conjugate-transposed coefficients over the conjugated denominator."""
        return RationalMatrixFunction(self.numerator.H, self.denominator.conj())

    def __call__(self, z):
        return eval_at_scalar(self, z)


def _matmul(A, X):
    if isinstance(A, Operator):
        return A.matvec(X)
    return A @ X


def _check_block(P, V):
    V = np.asarray(V)
    if V.ndim != 2 or V.shape[1] != P.block_size:
        raise DimensionMismatch(f'block vector has shape {V.shape}, expected b={P.block_size} columns')
    return V.astype(complex, copy=False)


def apply(P, A, V):
    """``P(A) o V`` by Horner's rule on the block coefficients (d products with A)."""
    V = _check_block(P, V)
    if A.shape[1] != V.shape[0]:
        raise DimensionMismatch(f'A is {A.shape}, V has {V.shape[0]} rows')
    c = P.coeffs
    W = V @ c[-1]
    for G in c[-2::-1]:
        W = _matmul(A, W) + V @ G
    return W


def _dense(A):
    if isinstance(A, Operator):
        return A.todense()
    if sp.issparse(A):
        return A.toarray()
    return np.asarray(A, dtype=complex)


def apply_inv(P, A, V):
    """``P(A) o^{-1} V`` for small dense ``A``.

    Uses a complex Schur form ``A = Z T Z^H``; the transformed system is block
    triangular with diagonal blocks ``P(lambda_r)`` and is solved bottom-up.
    """
    V = _check_block(P, V)
    A = _dense(A)
    n, b = V.shape
    if A.shape != (n, n):
        raise DimensionMismatch(f'A is {A.shape}, V has {n} rows')
    if n * b > DENSE_INV_LIMIT:
        raise SizeGuard(f'apply_inv is dense-only (n*b = {n * b} > {DENSE_INV_LIMIT})')
    T, Z = spla.schur(A, output='complex')
    Vt = Z.conj().T @ V
    c = P.coeffs
    d = P.degree
    powers = [np.eye(n, dtype=complex)]
    for _ in range(d):
        powers.append(powers[-1] @ T)
    scale = sum(np.linalg.norm(G) * max(1.0, np.abs(np.diag(T)).max()) ** i
                for i, G in enumerate(c))
    W = np.zeros_like(Vt)
    for r in range(n - 1, -1, -1):
        rhs = Vt[r].copy()
        if r < n - 1:
            for i in range(1, d + 1):
                rhs -= (powers[i][r, r + 1:] @ W[r + 1:]) @ c[i]
        Pl = P(T[r, r])
        s = np.linalg.svd(Pl, compute_uv=False)
        if s[-1] <= 1e-14 * scale:
            raise InvalidPolynomialOnSpectrum(
                f'P(lambda) is singular at eigenvalue {T[r, r]:.6g} of A')
        W[r] = np.linalg.solve(Pl.T, rhs)
    return Z @ W


def apply_rational(R, A, V):
    """``R(A) o V = Q(A)^{-1} (P(A) o V)``, with ``Q(A)^{-1}`` as shifted solves."""
    W = apply(R.numerator, A, V)
    if R.denominator.roots:
        op = as_operator(A)
        for xi in R.denominator.roots:
            W = op.solve_shifted(xi, W)
    return W


def apply_rational_inv(R, A, V):
    """``R(A) o^{-1} V = Q(A) (P(A) o^{-1} V)``."""
    W = apply_inv(R.numerator, A, V)
    for xi in R.denominator.roots:
        W = _matmul(A, W) - xi * W
    return W


def eval_at_scalar(R, lam):
    """``P(lam) / Q(lam)`` as a ``b x b`` matrix."""
    if isinstance(R, MatrixPolynomial):
        return R(lam)
    for xi in R.denominator.roots:
        if abs(lam - xi) <= 1e-14 * max(1.0, abs(xi)):
            raise PoleEvaluation(f'{lam} is a pole of R')
    return R.numerator(lam) / R.denominator(lam)


def limit_at_infinity(R):
    """``lim_{|z| -> inf} R(z)``; ``None`` when the limit is infinite.

    Degrees are the formal ones: a numerator of formal degree d over a
    denominator with fewer than d roots is treated as unbounded.
    """
    d, q = R.numerator.degree, R.denominator.degree
    b = R.block_size
    if d > q:
        return None
    if d < q:
        return np.zeros((b, b), dtype=complex)
    return R.numerator.coeffs[-1].copy()


def det(R, lam):
    return complex(np.linalg.det(eval_at_scalar(R, lam)))


def sigma_min(R, lam):
    return float(np.linalg.svd(eval_at_scalar(R, lam), compute_uv=False)[-1])


@dataclass(frozen=True, eq=False)
class CharPoly:
    """Monic block characteristic polynomial together with the solvents used to build it."""

    poly: MatrixPolynomial
    solvents: tuple
    eigenvalues: np.ndarray


def _default_order(ev):
    c = ev.mean()
    return np.lexsort((np.abs(ev - c), np.round(np.angle(ev - c), 12)))


def block_char_poly(A_small, V, order=None):
    """Monic block characteristic polynomial of ``A_small`` w.r.t. ``V``.

    ``A_small`` (``db x db``) is diagonalized, its eigenvalues are grouped in
    ``d`` consecutive blocks of ``b`` (after sorting with ``order``, a
    permutation or a callable mapping eigenvalues to one) and each block gives
    a solvent ``S_i = W_i^{-1} Theta_i W_i``.  The coefficients are the unique
    monic ones with all ``S_i`` as left solvents (block Vandermonde solve).
    """
    A_small = _dense(A_small)
    V = np.asarray(V, dtype=complex)
    N, b = V.shape
    if A_small.shape != (N, N) or N % b:
        raise DimensionMismatch(f'A is {A_small.shape}, V is {V.shape}; need A of size d*b')
    d = N // b
    ev, U = np.linalg.eig(A_small)
    if order is None:
        perm = _default_order(ev)
    elif callable(order):
        perm = np.asarray(order(ev))
    else:
        perm = np.asarray(order)
    ev, U = ev[perm], U[:, perm]
    try:
        W = np.linalg.solve(U, V)
    except np.linalg.LinAlgError as exc:
        raise IllConditionedCharPoly('A_small is not diagonalizable', block_index=-1) from exc
    solvents = []
    for i in range(d):
        Wi = W[i * b:(i + 1) * b]
        s = np.linalg.svd(Wi, compute_uv=False)
        if s[-1] < CHARPOLY_RCOND * s[0] or s[0] == 0:
            raise IllConditionedCharPoly(
                f'block {i} of U^-1 V is numerically singular '
                f'(sigma_min/sigma_max = {s[-1] / max(s[0], 1e-300):.2e})', block_index=i)
        solvents.append(np.linalg.solve(Wi, ev[i * b:(i + 1) * b, None] * Wi))
    # sum_j S_i^j G_j = -S_i^d for every i
    M = np.zeros((d * b, d * b), dtype=complex)
    rhs = np.zeros((d * b, b), dtype=complex)
    for i, S in enumerate(solvents):
        Pw = np.eye(b, dtype=complex)
        for j in range(d):
            M[i * b:(i + 1) * b, j * b:(j + 1) * b] = Pw
            Pw = Pw @ S
        rhs[i * b:(i + 1) * b] = -Pw
    G = np.linalg.solve(M, rhs)
    coeffs = np.concatenate([G.reshape(d, b, b), np.eye(b)[None]], axis=0)
    return CharPoly(MatrixPolynomial(coeffs), tuple(solvents), ev)


def is_solvent(P, S, tol=1e-10):
    """Whether ``P(S) = sum_i S^i G_i`` vanishes (relative to the size of the terms).

    Returns ``(flag, residual)`` with the absolute Frobenius residual.
    """
    S = np.asarray(S, dtype=complex)
    out = np.zeros_like(S)
    scale = 0.0
    Pw = np.eye(S.shape[0], dtype=complex)
    for G in P.coeffs:
        term = Pw @ G
        out += term
        scale += np.linalg.norm(term)
        Pw = Pw @ S
    res = float(np.linalg.norm(out))
    return res <= tol * max(scale, 1.0), res


def cauchy_quadrature_check(R, A, V, center, radius, nodes):
    """Relative error of the trapezoidal rule for the contour-integral
    representation of ``R(A) o^{-1} V`` on a circle.

    The integrand ``R(zI) o^{-1} [(zI - A)^{-1} V]`` is evaluated as
    ``(zI - A)^{-1} V R(z)^{-1}``.
    """
    A = _dense(A)
    V = np.asarray(V, dtype=complex)
    n = A.shape[0]
    exact = apply_rational_inv(R, A, V)
    for shift in (0.0, 0.5, 0.25):
        theta = 2 * np.pi * (np.arange(nodes) + shift) / nodes
        z = center + radius * np.exp(1j * theta)
        try:
            acc = np.zeros_like(V)
            for zj in z:
                X = np.linalg.solve(zj * np.eye(n) - A, V)
                acc += (X @ np.linalg.inv(eval_at_scalar(R, zj))) * (zj - center)
            approx = acc / nodes
            break
        except (np.linalg.LinAlgError, PoleEvaluation):
            continue
    else:
        raise PoleEvaluation('every quadrature rotation hits a singularity')
    return float(np.linalg.norm(approx - exact) / np.linalg.norm(exact))
