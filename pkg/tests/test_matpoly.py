import numpy as np
import pytest
from hypothesis import given, strategies as st

from rksylv import matpoly as mp
from rksylv.errors import (DimensionMismatch, IllConditionedCharPoly,
                           InvalidPolynomialOnSpectrum, PoleEvaluation, PoleOnSpectrum)
from rksylv.oracle import dense_apply_inv_kron, dense_apply_kron

from conftest import crandn, rel


def random_poly(rng, b, d, monic=False, lead_shift=0.0):
    c = crandn(rng, d + 1, b, b) / np.sqrt(b)
    if monic:
        c[-1] = np.eye(b)
    c[0] += lead_shift * np.eye(b)
    return mp.MatrixPolynomial(c)


# ---- apply ------------------------------------------------------------------

def test_apply_identity_polynomial(rng):
    A = crandn(rng, 5, 5)
    V = crandn(rng, 5, 2)
    assert np.allclose(mp.apply(mp.MatrixPolynomial.identity(2), A, V), V)


def test_apply_monomial_on_diagonal():
    out = mp.apply(mp.MatrixPolynomial.monomial(1, 1), np.diag([1.0, 2.0]), np.ones((2, 1)))
    assert np.allclose(out.ravel(), [1, 2])


def test_apply_matches_kronecker_oracle(rng):
    A = crandn(rng, 4, 4)
    V = crandn(rng, 4, 2)
    P = random_poly(rng, 2, 2)
    assert rel(mp.apply(P, A, V), dense_apply_kron(P, A, V)) <= 1e-12


def test_apply_accepts_sparse_and_checks_shapes(rng):
    import scipy.sparse as sp
    A = sp.random(10, 10, density=0.3, random_state=1, format='csr')
    V = crandn(rng, 10, 2)
    P = random_poly(rng, 2, 3)
    assert rel(mp.apply(P, A, V), mp.apply(P, A.toarray(), V)) <= 1e-13
    with pytest.raises(DimensionMismatch):
        mp.apply(P, A, crandn(rng, 10, 3))
    with pytest.raises(DimensionMismatch):
        mp.apply(P, A, crandn(rng, 9, 2))


@given(seed=st.integers(0, 2**32 - 1), b=st.sampled_from([1, 2, 3]), d=st.integers(0, 3),
       alpha=st.complex_numbers(max_magnitude=10, allow_nan=False, allow_infinity=False))
def test_apply_is_linear(seed, b, d, alpha):
    rng = np.random.default_rng(seed)
    n = 12
    A = crandn(rng, n, n) / np.sqrt(n)
    P = random_poly(rng, b, d)
    V1, V2 = crandn(rng, n, b), crandn(rng, n, b)
    lhs = mp.apply(P, A, alpha * V1 + V2)
    rhs = alpha * mp.apply(P, A, V1) + mp.apply(P, A, V2)
    assert np.linalg.norm(lhs - rhs) <= 1e-12 * (1 + abs(alpha)) * max(
        np.linalg.norm(mp.apply(P, A, V1)) + np.linalg.norm(mp.apply(P, A, V2)), 1.0)


# ---- apply_inv --------------------------------------------------------------

def test_apply_inv_identity(rng):
    V = crandn(rng, 6, 2)
    assert np.allclose(mp.apply_inv(mp.MatrixPolynomial.identity(2), crandn(rng, 6, 6), V), V)


def test_apply_inv_scalar_shift():
    P = mp.MatrixPolynomial([[[-2.0]], [[1.0]]])
    out = mp.apply_inv(P, np.diag([1.0, 3.0]), np.ones((2, 1)))
    assert np.allclose(out.ravel(), [-1, 1])


def test_apply_inv_singular_raises():
    P = mp.MatrixPolynomial.linear(np.array([[1.0]]))
    with pytest.raises(InvalidPolynomialOnSpectrum):
        mp.apply_inv(P, np.diag([1.0, 3.0]), np.ones((2, 1)))


@given(seed=st.integers(0, 2**32 - 1), b=st.sampled_from([1, 2, 3]), d=st.integers(1, 3))
def test_apply_inv_round_trip(seed, b, d):
    rng = np.random.default_rng(seed)
    n = 8
    A = crandn(rng, n, n) / np.sqrt(n)
    P = random_poly(rng, b, d, monic=True, lead_shift=4.0)
    V = crandn(rng, n, b)
    W = mp.apply_inv(P, A, V)
    assert rel(mp.apply(P, A, W), V) <= 1e-10
    assert rel(W, dense_apply_inv_kron(P, A, V)) <= 1e-9


def test_apply_inv_nonmonic_leading_coefficient(rng):
    n, b = 7, 2
    A = crandn(rng, n, n) / 3
    P = random_poly(rng, b, 2, lead_shift=3.0)
    V = crandn(rng, n, b)
    assert rel(mp.apply_inv(P, A, V), dense_apply_inv_kron(P, A, V)) <= 1e-10


# ---- rational functions ---------------------------------------------------------

def test_apply_rational_empty_denominator(rng):
    A = crandn(rng, 6, 6)
    V = crandn(rng, 6, 2)
    P = random_poly(rng, 2, 2)
    R = mp.RationalMatrixFunction(P)
    assert np.array_equal(mp.apply_rational(R, A, V), mp.apply(P, A, V))


def test_apply_rational_resolvent(rng):
    n = 9
    A = np.diag(-2 * np.ones(n)) + np.diag(np.ones(n - 1), 1) + np.diag(np.ones(n - 1), -1)
    v = rng.standard_normal((n, 1))
    xi = 0.7 + 0.2j
    R = mp.RationalMatrixFunction(mp.MatrixPolynomial.identity(1), mp.ScalarDenominator((xi,)))
    assert rel(mp.apply_rational(R, A, v), np.linalg.solve(A - xi * np.eye(n), v)) <= 1e-12


def test_apply_rational_pole_on_spectrum():
    R = mp.RationalMatrixFunction(mp.MatrixPolynomial.identity(1), mp.ScalarDenominator((2.0,)))
    with pytest.raises(PoleOnSpectrum):
        mp.apply_rational(R, np.diag([1.0, 2.0]), np.ones((2, 1)))


def test_apply_rational_commutes_with_polynomials_in_A(rng):
    n, b = 10, 2
    A = crandn(rng, n, n) / np.sqrt(n)
    B = 2 * np.eye(n) - A + 0.5 * A @ A
    R = mp.RationalMatrixFunction(random_poly(rng, b, 2), mp.ScalarDenominator((3.0, -2 + 1j)))
    V = crandn(rng, n, b)
    assert rel(B @ mp.apply_rational(R, A, V), mp.apply_rational(R, A, B @ V)) <= 1e-11


@given(seed=st.integers(0, 2**32 - 1))
def test_representation_independence(seed):
    rng = np.random.default_rng(seed)
    n, b = 8, 2
    A = crandn(rng, n, n) / np.sqrt(n)
    P = random_poly(rng, b, 2, monic=True, lead_shift=4.0)
    roots = (3.0, -2.5j)
    extra = (4.0 + 1j,)
    R1 = mp.RationalMatrixFunction(P, mp.ScalarDenominator(roots))
    s = mp.ScalarDenominator(extra).coefficients()
    R2 = mp.RationalMatrixFunction(P.scale_by_scalar_poly(s), mp.ScalarDenominator(roots + extra))
    V = crandn(rng, n, b)
    assert rel(mp.apply_rational(R2, A, V), mp.apply_rational(R1, A, V)) <= 1e-10
    assert rel(mp.apply_rational_inv(R2, A, V), mp.apply_rational_inv(R1, A, V)) <= 1e-10


@given(seed=st.integers(0, 2**32 - 1))
def test_scalar_product_lemma(seed):
    rng = np.random.default_rng(seed)
    n, b = 8, 2
    A = crandn(rng, n, n) / np.sqrt(n)
    P = random_poly(rng, b, 2, monic=True, lead_shift=4.0)
    q = np.array([3.0, -1.0, 0.5])       # q(z) = 3 - z + z^2/2, no roots near W(A)
    Pq = P.scale_by_scalar_poly(q)
    qA = q[0] * np.eye(n) + q[1] * A + q[2] * A @ A
    V = crandn(rng, n, b)
    assert rel(qA @ mp.apply(P, A, V), mp.apply(Pq, A, V)) <= 1e-10
    assert rel(np.linalg.solve(qA, mp.apply_inv(P, A, V)), mp.apply_inv(Pq, A, V)) <= 1e-10


def test_scalar_evaluation_lemma(rng):
    n, m, b = 6, 5, 2
    z = 1.3 - 0.4j
    R = mp.RationalMatrixFunction(random_poly(rng, b, 2, monic=True, lead_shift=2.0),
                                  mp.ScalarDenominator((0.5, 2j)))
    V = crandn(rng, n, b)
    W = crandn(rng, m, b)
    Rz = mp.eval_at_scalar(R, z)
    out = mp.apply_rational_inv(R, z * np.eye(n), V)
    assert rel(out, V @ np.linalg.inv(Rz)) <= 1e-10
    # R(zI_n) o^{-1} (V W^H) acting on the b x m "block vector" from the right
    Rh_bar = mp.apply_rational_inv(R.H, np.conj(z) * np.eye(m), W)
    lhs = V @ np.linalg.inv(Rz) @ W.conj().T
    assert rel(V @ Rh_bar.conj().T, lhs) <= 1e-10


def test_apply_rational_inv_inverts(rng):
    n, b = 9, 3
    A = crandn(rng, n, n) / 3
    R = mp.RationalMatrixFunction(random_poly(rng, b, 2, monic=True, lead_shift=3.0),
                                  mp.ScalarDenominator((2.5, -3j)))
    V = crandn(rng, n, b)
    assert rel(mp.apply_rational(R, A, mp.apply_rational_inv(R, A, V)), V) <= 1e-10


# ---- scalar evaluation ------------------------------------------------------

def test_eval_at_scalar_examples():
    b = 3
    R = mp.RationalMatrixFunction(mp.MatrixPolynomial.monomial(b, 1))
    assert np.allclose(mp.eval_at_scalar(R, 3.0), 3 * np.eye(b))
    R1 = mp.RationalMatrixFunction(mp.MatrixPolynomial([[[-1.0]], [[1.0]]]),
                                   mp.ScalarDenominator((5.0,)))
    assert np.isclose(mp.eval_at_scalar(R1, 2.0)[0, 0], -1 / 3)
    with pytest.raises(PoleEvaluation):
        mp.eval_at_scalar(R1, 5.0)


def test_sigma_min_matches_inverse_norm(rng):
    R = mp.RationalMatrixFunction(random_poly(rng, 3, 2), mp.ScalarDenominator((1j,)))
    for lam in crandn(rng, 5):
        M = mp.eval_at_scalar(R, lam)
        assert np.isclose(mp.sigma_min(R, lam), 1 / np.linalg.norm(np.linalg.inv(M), 2), rtol=1e-10)
        assert np.isclose(mp.det(R, lam), np.linalg.det(M))


def test_limit_at_infinity():
    b = 2
    P = mp.MatrixPolynomial(np.stack([np.eye(b), 2 * np.eye(b)]))
    assert np.allclose(mp.limit_at_infinity(mp.RationalMatrixFunction(P, mp.ScalarDenominator((1.0,)))),
                       2 * np.eye(b))
    assert mp.limit_at_infinity(mp.RationalMatrixFunction(P)) is None
    assert np.allclose(mp.limit_at_infinity(
        mp.RationalMatrixFunction(P, mp.ScalarDenominator((1.0, 2.0)))), 0)


def test_adjoint_and_conjugate(rng):
    R = mp.RationalMatrixFunction(random_poly(rng, 2, 2), mp.ScalarDenominator((1 + 1j,)))
    z = 0.3 + 0.7j
    assert np.allclose(R.H(np.conj(z)), R(z).conj().T)
    assert np.allclose(R.conj()(np.conj(z)), R(z).conj())


def test_denominator_drops_infinite_roots():
    q = mp.ScalarDenominator((np.inf, 2.0))
    assert q.roots == (2 + 0j,)
    assert np.allclose(q.coefficients(), [-2, 1])


# ---- block characteristic polynomial -------------------------------------------

def test_char_poly_single_block(rng):
    b = 3
    A = crandn(rng, b, b)
    V = crandn(rng, b, b)
    chi = mp.block_char_poly(A, V).poly
    assert chi.degree == 1 and chi.monic()
    assert np.allclose(chi.coeffs[0], -np.linalg.solve(V, A @ V))


def test_char_poly_scalar_case():
    chi = mp.block_char_poly(np.diag([1.0, 2.0]), np.ones((2, 1))).poly
    assert np.allclose(chi.coeffs[:, 0, 0], [2, -3, 1])
    assert np.allclose(mp.apply(chi, np.diag([1.0, 2.0]), np.ones((2, 1))), 0)


def test_char_poly_defining_property(rng):
    A = crandn(rng, 6, 6)
    V = crandn(rng, 6, 2)
    cp = mp.block_char_poly(A, V)
    assert cp.poly.degree == 3 and cp.poly.monic()
    assert np.linalg.norm(mp.apply(cp.poly, A, V)) / np.linalg.norm(V) <= 1e-8
    # every eigenvalue of A is a root of det(chi)
    for lam in np.linalg.eigvals(A):
        assert mp.sigma_min(mp.RationalMatrixFunction(cp.poly), lam) <= 1e-8 * np.linalg.norm(A) ** 3


def test_char_poly_leftmost_solvent():
    # the naive product (zI - S1)(zI - S2) has S1 as left solvent but not S2
    rng = np.random.default_rng(3)
    S1, S2 = crandn(rng, 2, 2), crandn(rng, 2, 2)
    P = mp.MatrixPolynomial.linear(S1) * mp.MatrixPolynomial.linear(S2)
    assert mp.is_solvent(P, S1)[0]
    assert not mp.is_solvent(P, S2)[0]


def test_char_poly_every_block_solvent(rng):
    # the Vandermonde construction makes every S_i a left solvent
    cp = mp.block_char_poly(crandn(rng, 6, 6), crandn(rng, 6, 2))
    for S in cp.solvents:
        assert mp.is_solvent(cp.poly, S, tol=1e-8)[0]


def test_char_poly_ill_conditioned():
    # V inside an invariant subspace: the other eigenvector block vanishes
    A = np.diag([1.0, 2.0])
    with pytest.raises(IllConditionedCharPoly) as ei:
        mp.block_char_poly(A, np.array([[1.0], [0.0]]))
    assert ei.value.block_index in (0, 1)


def test_char_poly_shape_check(rng):
    with pytest.raises(DimensionMismatch):
        mp.block_char_poly(crandn(rng, 5, 5), crandn(rng, 5, 2))


def test_is_solvent_examples(rng):
    S = crandn(rng, 3, 3)
    assert mp.is_solvent(mp.MatrixPolynomial.linear(S), S)[0]
    p = mp.MatrixPolynomial([[[-1.0]], [[0.0]], [[1.0]]])
    assert mp.is_solvent(p, np.array([[1.0]]))[0]
    assert not mp.is_solvent(p, np.array([[2.0]]))[0]


# ---- Cauchy quadrature ------------------------------------------------------------

def test_cauchy_identity_function(rng):
    n = 6
    A = crandn(rng, n, n) / (3 * np.sqrt(n))
    v = crandn(rng, n, 1)
    R = mp.RationalMatrixFunction(mp.MatrixPolynomial.identity(1))
    assert mp.cauchy_quadrature_check(R, A, v, 0.0, 2.0, 64) <= 1e-10


def test_cauchy_monic_degree_one(rng):
    n, b = 4, 2
    A = crandn(rng, n, n)
    A *= 0.8 / np.abs(np.linalg.eigvals(A)).max()
    S = 6 * np.eye(b) + 0.3 * crandn(rng, b, b)
    R = mp.RationalMatrixFunction(mp.MatrixPolynomial.linear(S))
    V = crandn(rng, n, b)
    assert mp.cauchy_quadrature_check(R, A, V, 0.0, 2.0, 128) <= 1e-8


def test_cauchy_converges_geometrically(rng):
    n, b = 4, 2
    A = crandn(rng, n, n)
    A *= 0.8 / np.abs(np.linalg.eigvals(A)).max()
    R = mp.RationalMatrixFunction(mp.MatrixPolynomial.linear(3 * np.eye(b) + 0.2 * crandn(rng, b, b)),
                                  mp.ScalarDenominator((4.0,)))
    V = crandn(rng, n, b)
    errs = [mp.cauchy_quadrature_check(R, A, V, 0.0, 1.6, m) for m in (16, 32, 64, 128)]
    for e1, e2 in zip(errs, errs[1:]):
        assert e2 <= max(e1 / 2, 1e-13)
