import numpy as np
import pytest

from src.exception import RangeError, FitOverflowError
from src.components.hermite_core import gaussian_moment
from src.components.diagnostics import (moments_from_grid, moments_from_coeffs, lemma_remainder, convert_frame,
                                        coefficients_from_grid, grid_from_coefficients, concentration_table,
                                        gaussian_distance, tail_exponential_moment)
from src.entity.artifact_entity import GridDensity
from src.entity.config_entity import GridConfig
from tests.conftest import solve_steady

EPS = 0.1


def standard_gaussian(x):
    return np.exp(-0.5 * x ** 2) / np.sqrt(2.0 * np.pi)


def test_grid_moments_of_concentrated_gaussian(fine_grid):
    q = GridDensity.on_grid(lambda x: standard_gaussian((x - 0.02) / EPS) / EPS, fine_grid, frame= "q", eps= EPS)
    moments = moments_from_grid(q, 6, absolute= True)
    assert moments.m0 == pytest.approx(1.0, abs= 1e-12)
    assert moments.m1 == pytest.approx(0.02, abs= 1e-12)
    assert moments.central[2] == pytest.approx(EPS ** 2, rel= 1e-10)
    assert moments.central[4] == pytest.approx(3.0 * EPS ** 4, rel= 1e-10)
    assert moments.central[3] == pytest.approx(0.0, abs= 1e-14)
    assert moments.absolute[1] == pytest.approx(EPS * np.sqrt(2.0 / np.pi), rel= 1e-10)
    assert not moments.truncation_warning


def test_grid_moments_flag_truncated_tails():
    q = GridDensity.on_grid(standard_gaussian, GridConfig(half_width= 3.0, points= 301), frame= "N")
    assert moments_from_grid(q, 4).truncation_warning
    with pytest.raises(RangeError):
        moments_from_grid(q, 9)


def test_coefficient_moments_of_standard_gaussian():
    moments = moments_from_coeffs(np.eye(9)[0], 8)
    np.testing.assert_allclose(moments.central, [gaussian_moment(k) if k != 1 else 0.0 for k in range(9)])
    assert moments.frame == "N"
    for k in range(2, 7):
        assert lemma_remainder(np.eye(9)[0], k) == 0.0


def test_coefficient_moments_match_grid(fine_grid, rng):
    alpha = np.zeros(13)
    alpha[0] = 1.0
    alpha[1:] = 0.05 * rng.standard_normal(12) * 0.5 ** np.arange(12)
    from_coeffs = moments_from_coeffs(alpha, 6)
    from_grid = moments_from_grid(grid_from_coefficients(alpha, fine_grid, EPS), 6)
    assert from_coeffs.m1 == pytest.approx(from_grid.m1, abs= 1e-10)
    np.testing.assert_allclose(from_coeffs.central, from_grid.central, atol= 1e-8)


def test_convert_frame_scales_moments():
    moments = moments_from_coeffs(np.array([1.0, 0.3, 0.1]), 4, eps= EPS)
    q = convert_frame(moments, EPS, "q")
    assert q.frame == "q"
    assert q.m1 == pytest.approx(0.3 * EPS)
    np.testing.assert_allclose(q.central, moments.central * EPS ** np.arange(5))
    back = convert_frame(q, EPS, "N")
    np.testing.assert_allclose(back.central, moments.central)
    assert convert_frame(q, EPS, "q") is q


def test_projection_recovers_coefficients(fine_grid):
    alpha = np.array([1.0, 0.1, -0.05, 0.02, 0.01])
    density = grid_from_coefficients(alpha, fine_grid, EPS, frame= "q")
    assert density.frame == "q"
    np.testing.assert_allclose(coefficients_from_grid(density, 6), np.append(alpha, [0.0, 0.0]), atol= 1e-10)


def test_concentration_table_of_gaussian():
    table = concentration_table(np.eye(9)[0], EPS, 6)
    assert list(table["k"]) == [1, 2, 3, 4, 5, 6]
    np.testing.assert_allclose(table["deviation_ratio"], 0.0, atol= 1e-9)
    assert table.loc[table["k"] == 2, "gaussian_value"].item() == pytest.approx(EPS ** 2)


def test_concentration_table_frames_agree(quadratic_steady):
    in_q = concentration_table(quadratic_steady, EPS, 6, frame= "q")
    in_n = concentration_table(quadratic_steady, EPS, 6, frame= "N")
    np.testing.assert_allclose(in_q["deviation_ratio"], in_n["deviation_ratio"], rtol= 1e-8, atol= 1e-12)


def test_gaussian_distance(quadratic_steady, fine_grid):
    distance = gaussian_distance(quadratic_steady)
    assert distance == pytest.approx(np.linalg.norm(quadratic_steady.tail))
    assert 0.0 < distance <= 10.0 * EPS ** 2
    projected = gaussian_distance(quadratic_steady.to_grid(fine_grid, frame= "q"), K= 32)
    assert projected == pytest.approx(distance, abs= 1e-8)


def test_tail_exponential_moment(fine_grid):
    q = GridDensity.on_grid(lambda x: standard_gaussian(x / EPS) / EPS, fine_grid, frame= "q", eps= EPS)
    # int G exp(d x^2) = (1 - 2d)^(-1/2)
    assert tail_exponential_moment(q, EPS, 0.25) == pytest.approx(np.sqrt(2.0), rel= 1e-8)
    with pytest.raises(FitOverflowError):
        tail_exponential_moment(q, EPS, 0.6)


@pytest.fixture(scope= "module")
def quadratic_ratios(quadratic):
    ratios = {}
    for eps in (0.2, 0.1, 0.05):
        solution = solve_steady(quadratic, eps)
        table = concentration_table(solution, eps, 4, frame= "q").set_index("k")
        ratios[eps] = (table.loc[2, "deviation_ratio"], table.loc[4, "deviation_ratio"], gaussian_distance(solution) / eps ** 2)
    return ratios


@pytest.mark.parametrize("column", [0, 1, 2])
def test_concentration_ratios_settle_as_eps_shrinks(quadratic_ratios, column):
    coarse, middle, fine = (quadratic_ratios[eps][column] for eps in (0.2, 0.1, 0.05))
    assert 0.0 < fine < 100.0
    assert abs(fine - middle) < 0.25 * middle
    assert abs(fine - middle) <= abs(middle - coarse) + 1e-3 * middle


def test_variance_ratio_approaches_two(quadratic_ratios):
    c2 = [quadratic_ratios[eps][0] for eps in (0.2, 0.1, 0.05)]
    assert c2 == sorted(c2)
    assert c2[-1] == pytest.approx(2.0, abs= 0.1)
