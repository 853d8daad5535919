import itertools
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nadim.linalg import (
    LinearMap,
    NormedSpace,
    PreconditionError,
    compose,
    det_chain_bound,
    det_constant,
    g_oracle,
    hadamard_log_bound,
    operator_norm,
    pullback_det,
    square_map,
    triangular_basis,
)
from nadim.valued import REAL, Valuation

Q5 = Valuation.padic(5)


def brute_g(n: int) -> int:
    """max |det| over all ±1 matrices, no symmetry reduction."""
    best = 0
    for signs in itertools.product((-1, 1), repeat=n * n):
        best = max(best, abs(round(np.linalg.det(np.array(signs, float).reshape(n, n)))))
    return best


@pytest.mark.parametrize("n", [1, 2, 3])
def test_g_oracle_matches_brute_force(n):
    g = g_oracle(1, n)
    assert g.exact and g.value == brute_g(n)


def test_g_oracle_values():
    assert [g_oracle(1, n).value for n in (1, 2, 3, 4, 5)] == [1, 2, 4, 16, 48]
    assert g_oracle(0.5, 2).value == pytest.approx(0.5)
    assert g_oracle(1, 7, Q5).value == 1
    g6 = g_oracle(1, 6)
    assert not g6.exact and g6.to_json()["flag"] == "bound"
    assert g6.log_value == pytest.approx(hadamard_log_bound(1, 6))


@pytest.mark.parametrize("n", range(1, 6))
def test_g_oracle_bounds(n):
    assert g_oracle(1, n).value <= n ** (n / 2)
    for th in (0.3, 1.0, 2.5):
        assert g_oracle(th, n).value <= th**n * math.factorial(n) * (1 + 1e-12)


def test_det_constant_lattice_flag():
    assert det_constant(REAL, 3).value == 4
    assert det_constant(Q5, 3).value == 1
    loose = det_constant(Q5, 2, lattice=False)
    assert loose.value == 25 and not loose.exact


def test_operator_norm_examples():
    assert operator_norm(square_map(REAL, np.eye(3))) == 1
    assert operator_norm(square_map(REAL, [[1, 1], [0, 1]])) == 2
    assert operator_norm(square_map(Q5, [[5]])) == Fraction(1, 5)


def test_pullback_det_examples():
    assert pullback_det(square_map(REAL, np.diag([2.0, 3.0]))) == pytest.approx(6.0)
    assert pullback_det(square_map(Q5, [[5, 0], [0, Fraction(1, 25)]])) == 5
    # weighted identity X -> Y with the same weights is an isometry
    assert pullback_det(square_map(REAL, np.eye(2), (2.0, 0.5))) == pytest.approx(1.0)


def test_weighted_det_uses_weight_ratio():
    T = square_map(REAL, np.eye(2), (1.0, 1.0), (2.0, 3.0))
    assert pullback_det(T) == pytest.approx(6.0)


def test_json_roundtrip_padic():
    T = square_map(Q5, [[Fraction(1, 5), 2], [3, 25]], (Fraction(1, 5), 1))
    back = LinearMap.from_json(T.to_json())
    assert back.domain == T.domain and (back.entries == T.entries).all()


real_matrices = st.integers(1, 4).flatmap(
    lambda n: st.lists(st.lists(st.floats(-5, 5), min_size=n, max_size=n), min_size=n, max_size=n))


@settings(max_examples=200, deadline=None)
@given(real_matrices, st.data())
def test_multiplicativity_real(a, data):
    n = len(a)
    b = data.draw(st.lists(st.lists(st.floats(-5, 5), min_size=n, max_size=n), min_size=n, max_size=n))
    S = square_map(REAL, a)
    T = square_map(REAL, b)
    lhs = pullback_det(compose(T, S))
    rhs = pullback_det(T) * pullback_det(S)
    # roundoff in an n x n determinant is relative to |A|^n, not to det A
    scale = (np.abs(a).sum(axis=1).max() * np.abs(b).sum(axis=1).max()) ** n
    assert abs(lhs - rhs) <= 1e-9 * rhs + 1e-13 * scale


padic_entries = st.fractions(max_denominator=125).map(lambda f: f.limit_denominator(125))


@settings(max_examples=150, deadline=None)
@given(st.integers(1, 3), st.data())
def test_multiplicativity_padic(n, data):
    mat = st.lists(st.lists(padic_entries, min_size=n, max_size=n), min_size=n, max_size=n)
    w = st.lists(st.sampled_from([Fraction(1), Fraction(5), Fraction(1, 5), Fraction(25)]), min_size=n, max_size=n)
    wx, wy, wz = data.draw(w), data.draw(w), data.draw(w)
    S = square_map(Q5, data.draw(mat), wx, wy)
    T = square_map(Q5, data.draw(mat), wy, wz)
    assert pullback_det(compose(T, S)) == pullback_det(T) * pullback_det(S)


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 4), st.integers(0, 10**6))
def test_isometries_have_unit_det(n, seed):
    rng = np.random.default_rng(seed)
    P = np.eye(n)[rng.permutation(n)] * rng.choice([-1.0, 1.0], size=n)
    T = square_map(REAL, P)
    x = rng.normal(size=(n, 1000))
    assert np.allclose(np.abs(P @ x).max(axis=0), np.abs(x).max(axis=0))
    assert abs(pullback_det(T) - 1) <= 1e-9


def _unit_ball_points(U_span, rng, count):
    c = rng.normal(size=(U_span.shape[1], count))
    Y = U_span @ c
    return Y / np.abs(Y).max(axis=0)


def test_triangular_basis_examples():
    tb = triangular_basis(np.eye(3), 1.0, 1e-3)
    assert np.allclose(tb.eta, 0) and np.allclose(tb.u, np.eye(3))
    assert tb.coeff_bound == pytest.approx(1.001)
    tb = triangular_basis([[1.0, 0.0], [1.0, 1.0]], 0.5, 1e-3)
    assert tb.tail_distances[0] == pytest.approx(0.5, abs=1e-9)
    Y = _unit_ball_points(np.array([[1.0, 1.0], [0.0, 1.0]]), np.random.default_rng(0), 1000)
    mu = tb.coefficients(Y)
    assert np.abs(mu).max() <= tb.coeff_bound + 1e-9
    assert np.allclose(tb.u @ mu, Y)
    tb = triangular_basis([[0.7]], 0.5, 0.01)
    assert tb.coeff_bound == pytest.approx(2 * 1.01)


def test_triangular_basis_precondition():
    with pytest.raises(PreconditionError) as err:
        triangular_basis([[1.0, 0.0], [1.0, 0.1]], 0.5, 1e-3)
    assert err.value.index == 0


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 4), st.integers(0, 10**6))
def test_triangular_coefficients_bounded(m, seed):
    rng = np.random.default_rng(seed)
    D = m + 2
    V = rng.normal(size=(D, m))
    V /= np.abs(V).max(axis=0)
    w = np.ones(D)
    from nadim.linalg import _tail_distance_real

    kappa = min(_tail_distance_real(V, i, w) for i in range(m))
    if kappa < 1e-3:
        return
    tb = triangular_basis(V.T, kappa * (1 - 1e-9), 1e-2)
    Y = _unit_ball_points(V, rng, 500)
    mu = tb.coefficients(Y)
    assert np.abs(mu).max() <= tb.coeff_bound + 1e-9
    assert np.allclose(tb.u @ mu, Y, atol=1e-8)


def test_triangular_basis_padic_exact():
    V = [[1, 5, 0], [0, 1, 25]]
    tb = triangular_basis(V, 1, 0.1, valuation=Q5)
    for y in ([1, 5, 0], [Fraction(1, 5) * 5, 6, 25]):
        mu = [sum((tb.functionals[k, j] * y[j] for j in range(3)), Fraction(0)) for k in range(2)]
        assert all(Q5.abs(x) <= tb.coeff_bound for x in mu)


def test_chain_bound_examples():
    T = square_map(REAL, np.diag([3.0, 0.5]))
    cb = det_chain_bound(T, [np.eye(2).tolist(), [[0.0, 1.0]]], [3.0, 0.5])
    assert cb.hypothesis_ok and cb.holds and cb.bound == pytest.approx(3.0) and cb.det == pytest.approx(1.5)
    I = square_map(REAL, np.eye(3))
    cb = det_chain_bound(I, [np.eye(3).tolist(), np.eye(3)[1:].tolist(), [[0, 0, 1.0]]], [1, 1, 1])
    assert cb.bound == 4 and cb.det == pytest.approx(1)
    D = square_map(Q5, [[Fraction(1, 5), 0], [0, 25]])
    cb = det_chain_bound(D, [[[1, 0], [0, 1]], [[0, 1]]], [5, Fraction(1, 25)])
    assert cb.bound == cb.det == Fraction(1, 5)


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 4), st.integers(0, 10**6))
def test_chain_bound_dominates_det(n, seed):
    rng = np.random.default_rng(seed)
    A = rng.normal(size=(n, n))
    T = square_map(REAL, A)
    chain = [np.eye(n)[j:].tolist() for j in range(n)]
    kappa = [float(np.abs(A[:, j:]).sum(axis=1).max()) for j in range(n)]
    cb = det_chain_bound(T, chain, kappa, samples=200, seed=seed)
    if cb.hypothesis_ok:
        assert cb.holds
        assert float(cb.bound) >= float(cb.det) * (1 - 1e-12)


def test_normed_space_validation():
    with pytest.raises(ValueError):
        NormedSpace(REAL, 2, (1.0, -1.0))
    assert NormedSpace(Q5, 2, (Fraction(1, 5), 25)).lattice
    assert not NormedSpace(Q5, 1, (Fraction(2),)).lattice
