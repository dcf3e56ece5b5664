import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from src.exception import NumericError, DomainTooSmallError, RangeError
from src.components.operators import (product_coefficients, reproduction_spectral, d_epsilon,
                                      coefficient_residual, reproduction_grid, reproduction_central_moments)
from src.components.diagnostics import moments_from_grid, coefficients_from_grid, grid_from_coefficients
from src.entity.artifact_entity import GridDensity, MomentVector
from src.entity.selection import SelectionFunction
from tests.conftest import spectral_data

pairs = st.integers(4, 24).flatmap(lambda n: st.tuples(
    arrays(np.float64, n, elements= st.floats(-1.0, 1.0)), arrays(np.float64, n, elements= st.floats(-1.0, 1.0))))


def unit(k, K):
    e = np.zeros(K + 1)
    e[k] = 1.0
    return e


def gaussian(mean, std):
    return lambda x: np.exp(-0.5 * ((x - mean) / std) ** 2) / (np.sqrt(2.0 * np.pi) * std)


def test_product_table_is_read_only_and_lower_triangular():
    table = product_coefficients(8)
    assert not table.flags.writeable
    assert np.all(np.triu(table, 1) == 0.0)
    assert table[4, 2] == pytest.approx(np.sqrt(6.0) / 16.0)


@pytest.mark.parametrize("k, l, index, value", [
    (0, 0, 0, 1.0),
    (1, 1, 2, np.sqrt(2.0) / 4.0),
    (0, 2, 2, 0.25),
    (3, 2, 5, np.sqrt(10.0) / 32.0),
])
def test_product_rule_on_basis_modes(k, l, index, value):
    gamma = reproduction_spectral(unit(k, 8), unit(l, 8))
    np.testing.assert_allclose(gamma, value * unit(index, 8), atol= 1e-15)


def test_product_drops_modes_beyond_truncation():
    gamma = reproduction_spectral(unit(3, 4), unit(3, 4), 4)
    np.testing.assert_array_equal(gamma, 0.0)


@settings(max_examples= 100, deadline= None)
@given(pairs)
def test_bilinear_bound(pair):
    alpha, beta = pair
    gamma = reproduction_spectral(alpha, beta)
    assert np.linalg.norm(gamma) <= np.linalg.norm(alpha) * np.linalg.norm(beta) * (1.0 + 1e-12) + 1e-300


@settings(max_examples= 50, deadline= None)
@given(pairs)
def test_product_is_symmetric(pair):
    alpha, beta = pair
    np.testing.assert_allclose(reproduction_spectral(alpha, beta), reproduction_spectral(beta, alpha), atol= 1e-14)


@pytest.mark.parametrize("eps", [0.2, 0.1, 0.05])
def test_selection_data_for_quadratic(eps, quadratic):
    data = spectral_data(quadratic, eps)
    assert data.m0 == pytest.approx(eps ** 2 / 2.0, rel= 1e-12)
    assert data.coefficients[2] == pytest.approx(eps ** 2 / np.sqrt(2.0), rel= 1e-12)
    np.testing.assert_allclose(data.coefficients[1::2], 0.0, atol= 1e-13)
    np.testing.assert_allclose(data.matrix, data.matrix.T)
    D, leading = d_epsilon(data, quadratic)
    assert D == pytest.approx(-eps ** 2, rel= 1e-10)
    assert leading == pytest.approx(-eps ** 2)


def test_selection_data_parity(even_quartic):
    data = spectral_data(even_quartic, 0.1)
    np.testing.assert_allclose(data.coefficients[1::2], 0.0, atol= 1e-13)
    np.testing.assert_allclose(data.matrix[0::2, 1::2], 0.0, atol= 1e-12)


def test_selection_data_rejects_non_finite():
    with pytest.raises(NumericError):
        spectral_data(SelectionFunction("inf", lambda x: np.full_like(x, np.inf)), 0.1, K= 8)


def test_residual_vanishes_for_pure_reproduction():
    # without selection the standard Gaussian is a fixed point of the reproduction operator
    data = spectral_data(SelectionFunction("zero", lambda x: np.zeros_like(x)), 0.1, K= 8)
    np.testing.assert_allclose(coefficient_residual(unit(0, 8), data), 0.0, atol= 1e-15)


def test_residual_at_steady_state(quadratic_steady, quadratic_data):
    residual = coefficient_residual(quadratic_steady.coefficients, quadratic_data)
    assert np.linalg.norm(residual) <= 1e-10


def test_reproduction_grid_keeps_gaussian_fixed(small_grid):
    eps = 0.1
    q = GridDensity.on_grid(gaussian(0.0, eps), small_grid, frame= "q", eps= eps).normalized()
    out = reproduction_grid(q, eps)
    assert out.mass == pytest.approx(1.0, abs= 1e-10)
    np.testing.assert_allclose(out.values, q.values, atol= 1e-8 * q.values.max())


def test_reproduction_grid_frames_agree(small_grid):
    eps = 0.1
    q = GridDensity.on_grid(gaussian(0.03, 0.8 * eps), small_grid, frame= "q", eps= eps).normalized()
    in_q = reproduction_grid(q, eps)
    in_n = reproduction_grid(q.to_frame("N"), eps)
    np.testing.assert_allclose(in_n.to_frame("q").values, in_q.values, atol= 1e-10 * in_q.values.max())


def test_reproduction_grid_fft_matches_direct(small_grid):
    eps = 0.1
    q = GridDensity.on_grid(lambda x: 0.5 * gaussian(-0.2, eps)(x) + 0.5 * gaussian(0.2, eps)(x),
                            small_grid, frame= "q", eps= eps).normalized()
    direct = reproduction_grid(q, eps, "direct")
    fast = reproduction_grid(q, eps, "fft")
    np.testing.assert_allclose(fast.values, direct.values, atol= 1e-10 * direct.values.max())


def test_reproduction_grid_rejects_boundary_mass():
    x = np.linspace(-1.0, 1.0, 201)
    q = GridDensity(origin= -1.0, spacing= x[1] - x[0], values= np.ones_like(x) / 2.0, frame= "q", eps= 0.1)
    with pytest.raises(DomainTooSmallError):
        reproduction_grid(q, 0.1)
    with pytest.raises(NumericError):
        reproduction_grid(q.with_values(np.full_like(x, np.nan)), 0.1)


def test_spectral_and_grid_reproduction_agree(fine_grid, rng):
    alpha = np.zeros(9)
    alpha[0] = 1.0
    alpha[1:] = 0.1 * rng.standard_normal(8) * 0.5 ** np.arange(8)
    q = grid_from_coefficients(alpha, fine_grid, 0.1, frame= "N")
    projected = coefficients_from_grid(reproduction_grid(q, 0.1), 16)
    np.testing.assert_allclose(projected, reproduction_spectral(alpha, alpha, 16), atol= 1e-6)


def test_variance_law():
    moments = MomentVector(frame= "q", eps= 0.1, m0= 1.0, m1= 0.3, central= np.array([1.0, 0.0, 0.04, 0.0, 0.0]))
    out = reproduction_central_moments(moments, 0.1, 4)
    assert out.central[2] == pytest.approx(0.01 / 2.0 + 0.04 / 2.0)
    assert out.m1 == pytest.approx(0.3)


def test_gaussian_moments_are_fixed():
    eps = 0.1
    moments = MomentVector(frame= "q", eps= eps, m0= 1.0, m1= 0.0,
                           central= np.array([1.0, 0.0, eps ** 2, 0.0, 3.0 * eps ** 4]))
    np.testing.assert_allclose(reproduction_central_moments(moments, eps, 4).central, moments.central, rtol= 1e-14)


def test_third_moment_quartered():
    moments = MomentVector(frame= "N", eps= 0.1, m0= 1.0, m1= 0.0, central= np.array([1.0, 0.0, 1.0, 0.2]))
    assert reproduction_central_moments(moments, 0.1, 3).central[3] == pytest.approx(0.05)


def test_moment_law_range():
    moments = MomentVector(frame= "q", eps= 0.1, m0= 1.0, m1= 0.0, central= np.array([1.0, 0.0, 0.01]))
    with pytest.raises(RangeError):
        reproduction_central_moments(moments, 0.1, 4)


@pytest.mark.parametrize("density", [
    gaussian(0.02, 0.09),
    lambda x: 0.5 * gaussian(-0.3, 0.1)(x) + 0.5 * gaussian(0.3, 0.1)(x),
    lambda x: 0.7 * gaussian(-0.05, 0.08)(x) + 0.3 * gaussian(0.15, 0.12)(x),
], ids= ["gaussian", "bimodal", "skewed"])
def test_moment_law_matches_grid(density, fine_grid):
    eps = 0.1
    q = GridDensity.on_grid(density, fine_grid, frame= "q", eps= eps).normalized()
    before = moments_from_grid(q, 6)
    after = moments_from_grid(reproduction_grid(q, eps), 6)
    predicted = reproduction_central_moments(before, eps, 6)
    std = np.sqrt(before.central[2])
    for k in range(2, 7):
        assert abs(after.central[k] - predicted.central[k]) <= 1e-6 * max(abs(predicted.central[k]), std ** k), k
    assert after.central[2] == pytest.approx(eps ** 2 / 2.0 + before.central[2] / 2.0, abs= 1e-8 * eps ** 2)
