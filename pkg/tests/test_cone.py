import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings, strategies as st

from nullforge.cone import ConeVariety, parametrize_null_quadric, takagi
from nullforge.errors import ConeMembershipError

S2 = np.sqrt(2.0)
NULL3 = ConeVariety.null3()

finite = st.floats(-3, 3, allow_nan=False, allow_infinity=False)
cvec = st.tuples(*[st.tuples(finite, finite)] * 3).map(
    lambda t: np.array([complex(a, b) for a, b in t]))


def random_symmetric(n, rng):
    A = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return A + A.T + 4 * np.eye(n)


def test_rejects_bad_forms():
    with pytest.raises(ValueError):
        ConeVariety(np.eye(2))
    with pytest.raises(ValueError):
        ConeVariety(np.array([[1, 1, 0], [0, 1, 0], [0, 0, 1]], dtype=complex))
    with pytest.raises(ValueError):
        ConeVariety(np.diag([1.0, 1.0, 0.0]))


def test_spec_roundtrip():
    v = ConeVariety.null3()
    assert v.to_spec() == "null3"
    assert ConeVariety.from_spec("null3").is_null3
    Q = random_symmetric(4, np.random.default_rng(1))
    w = ConeVariety.from_spec(ConeVariety(Q).to_spec())
    assert np.array_equal(w.Q, Q)


@pytest.mark.parametrize("z, expected", [
    ((1, 1j, 0), 0.0),
    ((0, 0, 1), 1.0),
    ((1, 1j * S2, 1), 0.0),
])
def test_membership_examples(null3, z, expected):
    assert abs(null3.membership_residual(np.array(z)) - expected) < 1e-15


def test_flow_examples(null3):
    z = np.array([1, 1j, 0])
    assert np.array_equal(null3.tangent_flow((1, 2), 0.0, z), z)
    w = null3.tangent_flow((1, 2), np.pi / 4, z)
    assert np.allclose(w, [-1j, 1, 0], atol=1e-15)


def test_flow_matches_expm():
    rng = np.random.default_rng(3)
    v = ConeVariety(random_symmetric(4, rng))
    for pair in v.pairs():
        for t in (0.3, -0.7 + 0.2j, 1e-9):
            E = scipy.linalg.expm(t * v.field_matrix(pair))
            assert np.allclose(v.flow_matrix(pair, t), E, rtol=1e-12, atol=1e-13)


def test_pairs_are_one_based(null3):
    assert null3.pairs() == [(1, 2), (1, 3), (2, 3)]
    assert null3.pairs(exclude=1) == [(2, 3)]


@settings(max_examples=200, deadline=None)
@given(z=cvec, t=st.floats(-10, 10), k=st.integers(0, 2))
def test_flow_invariance_real_time(z, t, k):
    pair = NULL3.pairs()[k]
    w = NULL3.tangent_flow(pair, t, z)
    drift = abs(NULL3.membership_residual(w) - NULL3.membership_residual(z))
    assert drift < 1e-10 * (1 + np.linalg.norm(z) ** 2)


@settings(max_examples=100, deadline=None)
@given(z=cvec, t1=st.floats(-2, 2), t2=st.floats(-2, 2), k=st.integers(0, 2))
def test_flow_group_law(z, t1, t2, k):
    pair = NULL3.pairs()[k]
    a = NULL3.tangent_flow(pair, t1, NULL3.tangent_flow(pair, t2, z))
    b = NULL3.tangent_flow(pair, t1 + t2, z)
    assert np.linalg.norm(a - b) <= 1e-12 * max(np.linalg.norm(b), 1.0)


def test_fields_are_tangential():
    rng = np.random.default_rng(5)
    v = ConeVariety(random_symmetric(5, rng))
    z = rng.standard_normal((50, 5)) + 1j * rng.standard_normal((50, 5))
    for pair in v.pairs():
        M = v.field_matrix(pair)
        # d/dt P(exp(tM) z) at 0 = 2 (Qz)^T M z
        rate = np.einsum("ki,ki->k", z @ v.Q.T, z @ M.T)
        assert np.max(np.abs(rate)) < 1e-12 * np.max(np.abs(z)) ** 2


def test_fields_span_tangent_space(null3):
    rng = np.random.default_rng(7)
    for _ in range(20):
        g, w = rng.standard_normal(2) + 1j * rng.standard_normal(2)
        z = parametrize_null_quadric(g, w)
        V = np.array([null3.field_matrix(p) @ z for p in null3.pairs()])
        s = np.linalg.svd(V, compute_uv=False)
        assert int(np.sum(s > 1e-8 * s[0])) == 2


def test_tangent_basis(null3):
    z = np.array([1, 1j, 0])
    B = null3.tangent_basis(z)
    assert B.shape == (2, 3)
    assert np.max(np.abs(B @ (null3.Q @ z))) < 1e-12
    # (0, 0, 1) lies in the span
    coef, *_ = np.linalg.lstsq(B.T, np.array([0, 0, 1]), rcond=None)
    assert np.allclose(B.T @ coef, [0, 0, 1], atol=1e-12)
    # the span is the same at 2z
    B2 = null3.tangent_basis(2 * z)
    assert np.linalg.matrix_rank(np.vstack([B, B2]), tol=1e-10) == 2
    with pytest.raises(ConeMembershipError):
        null3.tangent_basis(np.array([0, 0, 1]))


def test_null_pair_examples(null3):
    t = np.array([0, 0, 1], dtype=complex)
    a, b = null3.null_pair_decompose(t)
    # the least-norm pair; (1, i sqrt2, 1), (-1, -i sqrt2, 1) is another valid answer
    assert abs(null3.membership_residual(a)) < 1e-12
    assert abs(null3.membership_residual(b)) < 1e-12
    assert np.allclose((a + b) / 2, t, atol=1e-12)
    assert np.isclose(np.linalg.norm(a), S2)
    alt = np.array([1, 1j * S2, 1])
    assert np.linalg.norm(a) < np.linalg.norm(alt)
    a, b = null3.null_pair_decompose(np.array([1, 1j, 0]))
    assert np.array_equal(a, [1, 1j, 0]) and np.array_equal(b, [1, 1j, 0])
    with pytest.raises(ValueError):
        null3.null_pair_decompose(np.zeros(3))


@settings(max_examples=100, deadline=None)
@given(t=cvec)
def test_null_pair_property(t):
    if np.linalg.norm(t) < 1e-6:
        return
    a, b = NULL3.null_pair_decompose(t)
    scale = 1 + np.linalg.norm(t) ** 2
    assert abs(NULL3.membership_residual(a)) < 1e-12 * scale
    assert abs(NULL3.membership_residual(b)) < 1e-12 * scale
    assert np.linalg.norm((a + b) / 2 - t) < 1e-12 * max(1.0, np.linalg.norm(t))


def test_null_pair_general_quadric():
    rng = np.random.default_rng(11)
    v = ConeVariety(random_symmetric(4, rng))
    for _ in range(10):
        t = rng.standard_normal(4) + 1j * rng.standard_normal(4)
        a, b = v.null_pair_decompose(t)
        assert v.scaled_residual(a) < 1e-12 and v.scaled_residual(b) < 1e-12
        assert np.allclose((a + b) / 2, t, atol=1e-12)


def test_takagi_factorization():
    rng = np.random.default_rng(13)
    S = random_symmetric(4, rng)
    sigma, U = takagi(S)
    assert np.allclose(U @ np.diag(sigma) @ U.T, S, atol=1e-12)
    assert np.allclose(U.conj().T @ U, np.eye(4), atol=1e-12)
    assert np.all(np.diff(sigma) <= 1e-12)


def test_parametrization():
    v = ConeVariety.null3()
    assert np.allclose(parametrize_null_quadric(0, 2), [1, 1j, 0])
    assert np.allclose(parametrize_null_quadric(1, 1), [0, 1j, 1])
    rng = np.random.default_rng(17)
    g = rng.standard_normal(100) + 1j * rng.standard_normal(100)
    w = rng.standard_normal(100) + 1j * rng.standard_normal(100)
    z = parametrize_null_quadric(g, w)
    assert np.max(np.abs(v.membership_residual(z))) < 1e-14 * np.max(np.abs(z) ** 2)
    with pytest.raises(ValueError):
        parametrize_null_quadric(1.0, 0.0)


@pytest.mark.parametrize("seed", range(5))
def test_connecting_arc_stays_on_cone(seed):
    rng = np.random.default_rng(seed)
    v = ConeVariety(random_symmetric(3, rng)) if seed % 2 else ConeVariety.null3()
    pts = []
    for _ in range(2):
        t = rng.standard_normal(3) + 1j * rng.standard_normal(3)
        pts.append(v.null_pair_decompose(t)[0])
    a, b = pts
    s = np.linspace(0, 1, 201)
    path = v.connecting_arc(a, b, s)
    assert np.array_equal(path[0], a) and np.array_equal(path[-1], b)
    assert np.max(v.scaled_residual(path)) < 1e-12
    assert np.min(np.linalg.norm(path, axis=1)) > 0
    assert np.max(np.linalg.norm(path, axis=1)) <= v.arc_bound(a, b) * (1 + 1e-12)
    # continuity: consecutive samples close
    assert np.max(np.linalg.norm(np.diff(path, axis=0), axis=1)) < 0.2 * v.arc_bound(a, b)


def test_connecting_arc_antipodal(null3):
    # straight interpolation of (i, 0, 1) and (-i, 0, 1) in the spinor chart hits the origin
    a, b = np.array([1j, 0, 1]), np.array([-1j, 0, 1])
    path = null3.connecting_arc(a, b, np.linspace(0, 1, 101))
    assert np.min(np.linalg.norm(path, axis=1)) > 0.5
