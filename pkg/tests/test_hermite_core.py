import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from src.exception import RangeError, NumericError
from src.components.hermite_core import (HermiteBasis, gaussian_moment, scaled_gaussian_moment,
                                         hermite_eval, hermite_table, project, synthesize, weighted_l2_norm, pad)

coefficients = arrays(np.float64, st.integers(1, 20), elements= st.floats(-1.0, 1.0))


def test_low_degree_polynomials():
    x = np.linspace(-3.0, 3.0, 7)
    np.testing.assert_allclose(hermite_eval(0, x), 1.0)
    np.testing.assert_allclose(hermite_eval(1, x), x)
    np.testing.assert_allclose(hermite_eval(2, x), (x ** 2 - 1.0) / np.sqrt(2.0))
    np.testing.assert_allclose(hermite_eval(3, x), (x ** 3 - 3.0 * x) / np.sqrt(6.0))


def test_table_matches_single_evaluations():
    x = np.linspace(-5.0, 5.0, 11)
    table = hermite_table(12, x)
    assert table.shape == (13, 11)
    for k in (0, 5, 12):
        np.testing.assert_allclose(table[k], hermite_eval(k, x), rtol= 1e-13, atol= 1e-13)


def test_basis_rejects_degree_out_of_range():
    basis = HermiteBasis(8)
    with pytest.raises(RangeError):
        basis.eval(9, 0.0)
    with pytest.raises(RangeError):
        HermiteBasis(-1)


def test_quadrature_weights_are_normalized(rule):
    assert rule.weights.sum() == pytest.approx(1.0, abs= 1e-14)
    assert rule.exactness == 2 * rule.order - 1


def test_orthonormality_to_order_32(rule):
    H = hermite_table(32, rule.nodes)
    gram = (H * rule.weights) @ H.T
    np.testing.assert_allclose(gram, np.eye(33), atol= 1e-10)


@pytest.mark.parametrize("k, expected", [(0, 1.0), (1, 0.0), (2, 1.0), (4, 3.0), (6, 15.0), (7, 0.0), (8, 105.0)])
def test_gaussian_moments(k, expected):
    assert gaussian_moment(k) == expected


def test_gaussian_moment_range():
    with pytest.raises(RangeError):
        gaussian_moment(65)
    with pytest.raises(RangeError):
        gaussian_moment(-1)


def test_kernel_moments_have_variance_one_half():
    assert scaled_gaussian_moment(2) == pytest.approx(0.5)
    assert scaled_gaussian_moment(4) == pytest.approx(0.75)


def test_project_polynomial(rule):
    # x^2 = 1 + sqrt(2) H_2
    alpha = project(lambda x: x ** 2, rule, 6)
    np.testing.assert_allclose(alpha, [1.0, 0.0, np.sqrt(2.0), 0.0, 0.0, 0.0, 0.0], atol= 1e-13)


def test_project_exponential(rule):
    # e^{tx} = e^{t^2/2} sum t^k H_k / sqrt(k!)
    shifted = project(lambda x: np.exp(0.5 * x), rule, 4)
    expected = np.exp(1.0 / 8.0) * np.array([0.5 ** k / np.sqrt(np.prod(np.arange(1, k + 1))) for k in range(5)])
    np.testing.assert_allclose(shifted, expected, rtol= 1e-12)


def test_project_rejects_non_finite(rule):
    with pytest.raises(NumericError):
        project(lambda x: np.full_like(x, np.inf), rule, 4)


@settings(max_examples= 50, deadline= None)
@given(coefficients)
def test_synthesize_matches_table(alpha):
    x = np.linspace(-4.0, 4.0, 9)
    np.testing.assert_allclose(synthesize(alpha, x), alpha @ hermite_table(alpha.size - 1, x), atol= 1e-10)


def test_weighted_norm_and_pad():
    assert weighted_l2_norm([3.0, 4.0]) == pytest.approx(5.0)
    np.testing.assert_array_equal(pad([1.0, 2.0], 3), [1.0, 2.0, 0.0, 0.0])
    np.testing.assert_array_equal(pad([1.0, 2.0, 3.0], 1), [1.0, 2.0])
