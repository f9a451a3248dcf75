"""Linear operators with a shifted-solve capability.

Everything in the Krylov machinery touches the large matrices only through
``matvec`` and ``solve_shifted``.  Dense arrays get an LU factorization per
shift, banded sparse matrices go through LAPACK's banded solver and anything
else can be wrapped with :class:`CallbackOperator`.
"""

import threading
import warnings

import numpy as np
import scipy.linalg as spla
import scipy.sparse as sp
import scipy.sparse.linalg as spsla

from .errors import PoleOnSpectrum

__all__ = ['Operator', 'DenseOperator', 'BandedOperator', 'SparseOperator',
           'CallbackOperator', 'as_operator']


def _as_block(X):
    X = np.asarray(X)
    if X.ndim == 1:
        X = X[:, None]
    return X.astype(complex, copy=False)


class Operator:
    """Abstract square operator acting on block vectors (n x b arrays)."""

    shape = (0, 0)

    @property
    def n(self):
        return self.shape[0]

    def matvec(self, X):
        raise NotImplementedError

    def solve_shifted(self, xi, X):
        """Return ``(A - xi I)^{-1} X``."""
        raise NotImplementedError

    def adjoint(self):
        raise NotImplementedError

    def todense(self):
        return self.matvec(np.eye(self.n, dtype=complex))

    @property
    def H(self):
        return self.adjoint()


class DenseOperator(Operator):
    """Dense matrix; LU factorizations are cached per shift."""

    def __init__(self, A, cache_size=8):
        A = np.asarray(A)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise ValueError(f'expected a square matrix, got shape {A.shape}')
        self.A = A.astype(complex)
        self.shape = self.A.shape
        self._cache = {}
        self._cache_size = cache_size
        self._lock = threading.Lock()

    def matvec(self, X):
        return self.A @ _as_block(X)

    def _factor(self, xi):
        with self._lock:
            lu = self._cache.get(xi)
        if lu is not None:
            return lu
        M = self.A - xi * np.eye(self.n)
        with warnings.catch_warnings():
            warnings.simplefilter('error', spla.LinAlgWarning)
            try:
                lu = spla.lu_factor(M, check_finite=False)
            except (spla.LinAlgWarning, np.linalg.LinAlgError) as exc:
                raise PoleOnSpectrum(f'A - ({xi}) I is singular', pole=xi) from exc
        d = np.abs(np.diag(lu[0]))
        if d.min() <= np.finfo(float).eps * max(d.max(), 1.0):
            raise PoleOnSpectrum(f'A - ({xi}) I is singular', pole=xi)
        with self._lock:
            if len(self._cache) >= self._cache_size:
                self._cache.pop(next(iter(self._cache)))
            self._cache[xi] = lu
        return lu

    def solve_shifted(self, xi, X):
        lu = self._factor(complex(xi))
        return spla.lu_solve(lu, _as_block(X), check_finite=False)

    def adjoint(self):
        return DenseOperator(self.A.conj().T)

    def todense(self):
        return self.A.copy()


class BandedOperator(Operator):
    """Banded matrix stored in LAPACK ``ab`` form with ``l`` sub- and ``u`` superdiagonals."""

    def __init__(self, ab, l, u):
        self.ab = np.asarray(ab, dtype=complex)
        self.l, self.u = l, u
        n = self.ab.shape[1]
        self.shape = (n, n)

    @classmethod
    def from_sparse(cls, A):
        A = sp.csr_matrix(A)
        n = A.shape[0]
        coo = A.tocoo()
        offs = coo.col - coo.row
        u = int(max(offs.max(initial=0), 0))
        l = int(max(-offs.min(initial=0), 0))
        ab = np.zeros((l + u + 1, n), dtype=complex)
        ab[u + coo.row - coo.col, coo.col] = coo.data
        return cls(ab, l, u)

    def tosparse(self):
        n = self.n
        diags, offsets = [], []
        for k in range(-self.l, self.u + 1):
            row = self.u - k
            if k >= 0:
                diags.append(self.ab[row, k:])
            else:
                diags.append(self.ab[row, :n + k])
            offsets.append(k)
        return sp.diags(diags, offsets, shape=self.shape, format='csr')

    def matvec(self, X):
        X = _as_block(X)
        n = self.n
        Y = np.zeros_like(X)
        for k in range(-self.l, self.u + 1):
            row = self.u - k
            if k >= 0:
                Y[:n - k] += self.ab[row, k:, None] * X[k:]
            else:
                Y[-k:] += self.ab[row, :n + k, None] * X[:n + k]
        return Y

    def solve_shifted(self, xi, X):
        ab = self.ab.copy()
        ab[self.u] -= xi
        try:
            Y = spla.solve_banded((self.l, self.u), ab, _as_block(X), check_finite=False)
        except np.linalg.LinAlgError as exc:
            raise PoleOnSpectrum(f'A - ({xi}) I is singular', pole=xi) from exc
        if not np.all(np.isfinite(Y)):
            raise PoleOnSpectrum(f'A - ({xi}) I is singular', pole=xi)
        return Y

    def adjoint(self):
        n = self.n
        ab = np.zeros((self.l + self.u + 1, n), dtype=complex)
        # entry (i, j) of A lives at ab[u + i - j, j]; for A^H swap roles
        for k in range(-self.l, self.u + 1):
            src = self.u - k
            dst = self.l + k
            if k >= 0:
                ab[dst, :n - k] = self.ab[src, k:].conj()
            else:
                ab[dst, -k:] = self.ab[src, :n + k].conj()
        return BandedOperator(ab, self.u, self.l)

    def todense(self):
        return self.tosparse().toarray()


class SparseOperator(Operator):
    """General sparse matrix; sparse LU per shift, cached."""

    def __init__(self, A, cache_size=4):
        self.A = sp.csc_matrix(A, dtype=complex)
        self.shape = self.A.shape
        self._cache = {}
        self._cache_size = cache_size
        self._lock = threading.Lock()

    def matvec(self, X):
        return np.asarray(self.A @ _as_block(X))

    def solve_shifted(self, xi, X):
        xi = complex(xi)
        with self._lock:
            lu = self._cache.get(xi)
        if lu is None:
            try:
                lu = spsla.splu(self.A - xi * sp.identity(self.n, format='csc'))
            except RuntimeError as exc:
                raise PoleOnSpectrum(f'A - ({xi}) I is singular', pole=xi) from exc
            with self._lock:
                if len(self._cache) >= self._cache_size:
                    self._cache.pop(next(iter(self._cache)))
                self._cache[xi] = lu
        Y = lu.solve(_as_block(X))
        if not np.all(np.isfinite(Y)):
            raise PoleOnSpectrum(f'A - ({xi}) I is singular', pole=xi)
        return Y

    def adjoint(self):
        return SparseOperator(self.A.conj().T)

    def todense(self):
        return self.A.toarray()


class CallbackOperator(Operator):
    """Operator given by user callbacks.

    ``solve(xi, X)`` must return ``(A - xi I)^{-1} X``.
    """

    def __init__(self, n, matvec, solve, adjoint=None):
        self.shape = (n, n)
        self._matvec = matvec
        self._solve = solve
        self._adjoint = adjoint

    def matvec(self, X):
        return _as_block(self._matvec(_as_block(X)))

    def solve_shifted(self, xi, X):
        return _as_block(self._solve(xi, _as_block(X)))

    def adjoint(self):
        if self._adjoint is None:
            raise NotImplementedError('no adjoint callback supplied')
        return self._adjoint


def as_operator(A):
    """Wrap ``A`` (ndarray, scipy sparse matrix or Operator) as an :class:`Operator`."""
    if isinstance(A, Operator):
        return A
    if sp.issparse(A):
        op = BandedOperator.from_sparse(A)
        if op.l + op.u + 1 <= 7:
            return op
        return SparseOperator(A)
    return DenseOperator(A)
