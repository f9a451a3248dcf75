import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, strategies as st

from rksylv import matpoly as mp
from rksylv.bench import laplacian_1d
from rksylv.brad import INF
from rksylv.errors import FovEstimationFailed, InvalidContext
from rksylv.poles import (AdaptiveStrategy, ExtendedStrategy, FixedStrategy, FovBoundarySamples,
                          FovOptions, FovProvenance, PoleContext, adm_next_pole, adm_objective,
                          fov_boundary, fov_boundary_operator, make_strategy, next_pole_pair,
                          ritz_hull, sadm_next_pole, sadm_objective)

from conftest import crandn


def samples(pts):
    return FovBoundarySamples(np.asarray(pts, dtype=complex), FovProvenance.USER_BOUNDS)


# ---- ADM / sADM objectives ------------------------------------------------------

def test_adm_two_point_example():
    ctx = PoleContext((-1.0,), np.array([-2.0]), 1)
    obj = np.exp(adm_objective(ctx, [-0.5, -3.0]))
    assert np.allclose(obj, [1 / 3, 2])
    assert adm_next_pole(ctx, samples([-0.5, -3.0])) == -3.0


def test_returns_conjugate_of_maximizer():
    ctx = PoleContext((), np.array([-1.0 + 0j]), 1)
    pole = adm_next_pole(ctx, samples([-1.5 + 0.1j, -4.0 + 2.0j]))
    assert pole == -1.5 - 0.1j


def test_no_finite_poles_picks_smallest_ritz_product():
    # with an empty numerator the objective is 1 / prod |lam - conj(mu)|
    ritz = np.array([-1.0, -2.0 + 1j])
    ctx = PoleContext((INF,), ritz, 1)
    cand = np.array([-1.2, -3.0, -10.0 + 4j, -0.5j])
    prod = np.prod(np.abs(cand[:, None] - ritz.conj()[None]), axis=1)
    assert adm_next_pole(ctx, samples(cand)) == np.conj(cand[np.argmin(prod)])


def test_candidate_on_conjugated_ritz_value_wins():
    ctx = PoleContext((-5.0,), np.array([-1.0 - 1j, -2.0]), 1)
    pole, hit = adm_next_pole(ctx, samples([-3.0, -1.0 + 1j]), return_flag=True)
    assert hit and pole == -1.0 - 1j


def test_empty_inputs():
    ctx = PoleContext((), np.array([], dtype=complex), 1)
    with pytest.raises(InvalidContext):
        adm_next_pole(ctx, samples([-1.0, -2.0]))
    with pytest.raises(InvalidContext):
        sadm_next_pole(PoleContext((), np.array([-1.0]), 1), np.array([], dtype=complex))


def test_sadm_kept_set():
    ritz = np.array([-1.0, -1.1, -4.0, -4.2])
    ctx = PoleContext((), ritz, 2)
    lam = -1.0 + 1e-3j
    expected = -np.log(abs(lam + 1.0) * abs(lam + 4.0))
    assert np.isclose(sadm_objective(ctx, lam)[0], expected)


@given(seed=st.integers(0, 2**32 - 1), b=st.integers(1, 3), k=st.integers(1, 5))
def test_sadm_kept_set_size(seed, b, k):
    rng = np.random.default_rng(seed)
    ritz = -1 - rng.random(b * k) + 1j * rng.standard_normal(b * k)
    lam = 1 + rng.random() + 1j * rng.standard_normal()
    d = np.abs(lam - ritz.conj())
    kept = np.sort(d)[::b]
    assert kept.size == k
    ctx = PoleContext((), ritz, b)
    assert np.isclose(sadm_objective(ctx, lam)[0], -np.log(kept).sum())


@given(seed=st.integers(0, 2**32 - 1), k=st.integers(1, 8))
def test_adm_and_sadm_agree_for_single_vectors(seed, k):
    rng = np.random.default_rng(seed)
    ctx = PoleContext(tuple(-rng.random(k - 1) * 5), -rng.random(k) * 3 + 0.5j * rng.standard_normal(k), 1)
    cand = samples(-rng.random(30) * 6 + 1j * rng.standard_normal(30))
    assert adm_next_pole(ctx, cand) == sadm_next_pole(ctx, cand)


@given(seed=st.integers(0, 2**32 - 1), b=st.integers(1, 3), k=st.integers(1, 6))
def test_log_domain_matches_direct_product(seed, b, k):
    rng = np.random.default_rng(seed)
    xi = tuple(-rng.random(k - 1) * 4 - 0.1)
    ritz = -rng.random(b * k) * 3 + 0.3j * rng.standard_normal(b * k)
    ctx = PoleContext(xi, ritz, b)
    lam = -rng.random(10) * 6 + 1j * rng.standard_normal(10)
    direct = (np.prod(np.abs(lam[:, None] - np.conj(xi)[None]), axis=1) ** b
              / np.prod(np.abs(lam[:, None] - ritz.conj()[None]), axis=1))
    mask = (direct > 1e-100) & (direct < 1e100)
    assert np.allclose(np.exp(adm_objective(ctx, lam))[mask], direct[mask], rtol=1e-10)


def test_ritz_product_equals_char_poly_determinant(rng):
    b, d = 2, 3
    Bk = crandn(rng, b * d, b * d)
    v = crandn(rng, b * d, b)
    chi = mp.block_char_poly(Bk, v).poly
    ritz = np.linalg.eigvals(Bk)
    for lam in crandn(rng, 5):
        lhs = np.prod(np.abs(lam - ritz.conj()))
        rhs = abs(np.linalg.det(chi.conj()(lam)))
        assert abs(lhs - rhs) <= 1e-6 * lhs


# ---- field of values --------------------------------------------------------------

def test_fov_hermitian_interval(rng):
    M = crandn(rng, 8, 8)
    M = M + M.conj().T
    ev = np.linalg.eigvalsh(M)
    s = fov_boundary(M, P=50)
    eps = 1e-10 * (ev[-1] - ev[0])
    assert np.all(np.abs(s.points.imag) <= eps)
    assert s.points.real.min() >= ev[0] - eps and s.points.real.max() <= ev[-1] + eps
    assert np.isclose(s.points.real.min(), ev[0]) and np.isclose(s.points.real.max(), ev[-1])


def test_fov_jordan_block_is_disk():
    s = fov_boundary(np.array([[0.0, 1.0], [0.0, 0.0]]), P=200)
    r = np.abs(s.points)
    assert np.all(np.abs(r - 0.5) <= 1e-6)
    assert len(s) >= 100


def _inside_convex(points, poly, tol):
    c = poly.mean()
    ang = np.angle(poly - c)
    v = poly[np.argsort(ang)]
    for p in points:
        for a, b in zip(v, np.roll(v, -1)):
            cross = ((b - a).conjugate() * (p - a)).imag
            if cross < -tol * abs(b - a):
                return False
    return True


def test_fov_normal_matrix_hull(rng):
    ev = np.array([-1.0, -3.0 + 2j, -4.0 - 1j, -2.0 - 2j])
    Q, _ = np.linalg.qr(crandn(rng, 4, 4))
    M = Q @ np.diag(ev) @ Q.conj().T
    s = fov_boundary(M, P=100)
    assert _inside_convex(s.points, ev, 1e-8)
    # the eigenvalues (hull vertices) are hit
    for lam in ev:
        assert np.abs(s.points - lam).min() <= 1e-6


def test_fov_with_bounds_and_validation(rng):
    M = crandn(rng, 4, 4)
    s = fov_boundary(M, bounds=[10.0, -10.0], P=40)
    assert np.isclose(s.points.real.max(), 10.0) and np.isclose(s.points.real.min(), -10.0)
    with pytest.raises(ValueError):
        fov_boundary(M, P=4)
    with pytest.raises(FovEstimationFailed):
        samples([1.0, 1.0])


def test_fov_operator_tridiagonal():
    L = laplacian_1d(200)
    ev = np.linalg.eigvalsh(L.toarray())
    s = fov_boundary_operator(L, P=40)
    assert np.isclose(s.points.real.min(), ev[0], rtol=1e-8)
    assert np.isclose(s.points.real.max(), ev[-1], rtol=1e-8)
    assert np.all(np.abs(s.points.imag) <= 1e-8 * abs(ev[0]))


def test_fov_operator_nonsymmetric_sparse(rng):
    n = 60
    M = sp.random(n, n, density=0.1, random_state=2) + sp.diags(-np.arange(1.0, n + 1))
    s = fov_boundary_operator(M.tocsr(), P=32)
    dense = fov_boundary(M.toarray(), P=32)
    assert np.isclose(s.points.real.min(), dense.points.real.min(), rtol=1e-6)
    assert np.isclose(s.points.real.max(), dense.points.real.max(), rtol=1e-6)


# ---- strategies -----------------------------------------------------------------

def test_extended_sequence():
    s = ExtendedStrategy()
    seq = [next_pole_pair(s, None) for _ in range(4)]
    assert [x for x, _ in seq] == [0, INF, 0, INF]
    assert all(x == y or (np.isinf(x) and np.isinf(y)) for x, y in seq)
    s.reset()
    assert next_pole_pair(s, None)[0] == 0


def test_fixed_cycling():
    s = FixedStrategy([-1.0, -2.0])
    assert [s.next(None)[0] for _ in range(4)] == [-1, -2, -1, -2]
    s = make_strategy('fixed', fixed_poles=([-1.0], [5.0, 6.0]))
    assert [s.next(None) for _ in range(3)] == [(-1, 5), (-1, 6), (-1, 5)]
    with pytest.raises(ValueError):
        make_strategy('fixed')
    with pytest.raises(ValueError):
        make_strategy('bogus')


def test_conjugate_pairing():
    s = FixedStrategy([1 + 2j, -3.0, 4 - 1j], pair_conjugates=True)
    got = [s.next(None)[0] for _ in range(5)]
    assert got == [1 + 2j, 1 - 2j, -3.0, 4 - 1j, 4 + 1j]


def test_adaptive_pairing_overrides_objective():
    class Stub(AdaptiveStrategy):
        def _select(self, state):
            return 1 + 2j, 3.0
    s = Stub('adm', pair_conjugates=True)
    assert s.next(None) == (1 + 2j, 3.0)
    assert s.next(None)[0] == 1 - 2j


def test_make_strategy_passthrough():
    s = AdaptiveStrategy('sadm', fov=FovOptions(samples=50))
    assert make_strategy(s) is s
    assert make_strategy('ADM').kind == 'adm'
    with pytest.raises(ValueError):
        AdaptiveStrategy('foo')
