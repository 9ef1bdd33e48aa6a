import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from spacelike.oracles import finite_difference_gradient, kronecker_sym, principal_minor_sum, subset_sym_values
from spacelike.symfunc import (
    charpoly_sym_values,
    elem_sym_matrix,
    elem_sym_values,
    garding_membership,
    lemma24_margins,
    matrix_sym_values,
    newton_maclaurin_margin,
    newton_tensor,
    quotient_derivative,
)

finite = st.floats(-3, 3, allow_nan=False, allow_infinity=False)


def vectors(min_size=1, max_size=6):
    return st.integers(min_size, max_size).flatmap(lambda n: arrays(float, n, elements=finite))


def square(max_n=5):
    return st.integers(1, max_n).flatmap(lambda n: arrays(float, (n, n), elements=finite))


@pytest.mark.parametrize(
    "lam, expected",
    [([1, 1, 1], [1, 3, 3, 1]), ([1, 2, 3], [1, 6, 11, 6]), ([0, 0], [1, 0, 0])],
)
def test_elem_sym_values_examples(lam, expected):
    np.testing.assert_allclose(elem_sym_values(lam), expected, atol=1e-14)


@given(vectors())
def test_elem_sym_values_matches_subset_enumeration(lam):
    ref = subset_sym_values(lam)
    scale = np.maximum(1.0, np.abs(lam).max()) ** np.arange(lam.size + 1) * 64
    assert np.all(np.abs(elem_sym_values(lam) - ref) <= 1e-12 * scale)


@given(vectors(), st.floats(0.1, 3))
def test_elem_sym_values_homogeneous(lam, t):
    k = np.arange(lam.size + 1)
    lhs = elem_sym_values(t * lam)
    rhs = t**k * elem_sym_values(lam)
    assert np.allclose(lhs, rhs, rtol=1e-9, atol=1e-9 * np.max(np.abs(rhs)))


def test_elem_sym_matrix_examples():
    assert elem_sym_matrix(np.diag([1.0, 2.0]), 1) == pytest.approx(3.0)
    assert elem_sym_matrix(np.eye(3), 2) == pytest.approx(3.0)


def test_elem_sym_matrix_random_symmetric_vs_minors(rng):
    A = rng.normal(size=(5, 5))
    A = A + A.T
    assert elem_sym_matrix(A, 3) == pytest.approx(principal_minor_sum(A, 3), rel=1e-12)


def test_elem_sym_matrix_nonsymmetric_uses_characteristic_polynomial(rng):
    A = rng.normal(size=(4, 4))
    for k in range(5):
        assert elem_sym_matrix(A, k) == pytest.approx(principal_minor_sum(A, k), rel=1e-11, abs=1e-11)
    np.testing.assert_allclose(charpoly_sym_values(A), matrix_sym_values(A), rtol=1e-10, atol=1e-12)


def test_kronecker_oracle_agrees(rng):
    A = rng.normal(size=(4, 4))
    for k in range(1, 5):
        assert kronecker_sym(A, k) == pytest.approx(principal_minor_sum(A, k), rel=1e-10, abs=1e-12)


def test_newton_tensor_examples():
    np.testing.assert_allclose(newton_tensor(np.eye(3), 2), 2 * np.eye(3))
    np.testing.assert_allclose(newton_tensor(np.diag([1.0, 2.0]), 1), np.eye(2))


def test_newton_tensor_is_gradient_of_sk(rng):
    A = rng.normal(size=(4, 4))
    fd = finite_difference_gradient(lambda M: elem_sym_matrix(M, 3), A, step=1e-6)
    T = newton_tensor(A, 3)
    # T[i, j] = dS_k / dA[j, i]
    np.testing.assert_allclose(T, fd.T, rtol=1e-6, atol=1e-6 * np.abs(T).max())


@given(square())
def test_newton_tensor_contractions(A):
    n = A.shape[0]
    S = matrix_sym_values(A)
    scale = max(1.0, np.linalg.norm(A)) ** (n + 1) * 1e-9
    for k in range(1, n + 1):
        T = newton_tensor(A, k)
        assert abs(np.trace(T) - (n - k + 1) * S[k - 1]) <= scale
        assert abs(np.trace(T @ A) - k * S[k]) <= scale


@pytest.mark.parametrize("lam, k_max", [([1, 1, 1], 3), ([3, -1], 1), ([-1, -1], 0)])
def test_garding_membership(lam, k_max):
    assert garding_membership(lam).k_max == k_max


def test_newton_maclaurin_equality_and_examples():
    for k, l, r, s in [(2, 0, 1, 0), (3, 1, 2, 0), (3, 2, 2, 1), (3, 1, 1, 0)]:
        assert abs(newton_maclaurin_margin([2, 2, 2], k, l, r, s)) < 1e-12
    assert newton_maclaurin_margin([1, 2, 3], 2, 0, 1, 0) == pytest.approx(2 - np.sqrt(11 / 3), rel=1e-12)
    assert newton_maclaurin_margin([1, 1, 2], 3, 1, 2, 0) == pytest.approx(np.sqrt(5 / 3) - np.sqrt(1.5), rel=1e-12)


def test_newton_maclaurin_rejects_outside_cone():
    with pytest.raises(ValueError):
        newton_maclaurin_margin([3, -1, -1], 2, 0, 1, 0)


def test_quotient_margin_examples():
    assert np.allclose(lemma24_margins(np.eye(4), 2, 0), 0, atol=1e-14)
    t = np.sqrt(3 / 11)
    np.testing.assert_allclose(lemma24_margins(np.diag([1.0, 2.0, 3.0]), 2, 0), [2 * t - 1, 6 * t - 3, 1 / 3 - 2 * t**3, 0.0], atol=1e-14)
    np.testing.assert_allclose(lemma24_margins(np.diag([1.0, 1.0, 4.0]), 2, 1), [0.0, 0.0, 1 / 27, 1 / 12], atol=1e-14)


def test_quotient_derivative_examples(rng):
    np.testing.assert_allclose(quotient_derivative(np.eye(3), 2, 0), 2 * np.eye(3), atol=1e-14)
    np.testing.assert_allclose(quotient_derivative(np.eye(3), 2, 1), np.eye(3) / 3, atol=1e-14)
    Q, _ = np.linalg.qr(rng.normal(size=(4, 4)))
    A = (Q * rng.uniform(0.5, 2.0, size=4)) @ Q.T
    assert np.linalg.eigvalsh(quotient_derivative(A, 2, 1)).min() > 0


def test_quotient_derivative_matches_finite_differences(rng):
    Q, _ = np.linalg.qr(rng.normal(size=(3, 3)))
    A = (Q * [0.7, 1.1, 1.9]) @ Q.T
    fd = finite_difference_gradient(lambda M: elem_sym_matrix(M, 3) / elem_sym_matrix(M, 1), A)
    np.testing.assert_allclose(quotient_derivative(A, 3, 1), fd.T, rtol=1e-6, atol=1e-7)
