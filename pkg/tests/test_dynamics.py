import numpy as np
import pytest

from src.exception import BlowUpError, FitError, ModelDomainError
from src.components.diagnostics import grid_from_coefficients, coefficients_from_grid, moments_from_grid
from src.components.dynamics import (rk4_step, galerkin_rhs, perturbed_state, integrate_galerkin, integrate_grid,
                                     integrate_mass, decay_rate)
from src.entity.artifact_entity import GridDensity
from src.entity.selection import zero_selection
from tests.conftest import spectral_data, solve_steady


def test_rk4_step_is_fourth_order():
    step = rk4_step(0.1, np.array([1.0]), lambda y: -y)
    assert step[0] == pytest.approx(np.exp(-0.1), abs= 1e-7)


def test_rhs_vanishes_at_steady_state(quadratic_steady, quadratic_data):
    derivative = galerkin_rhs(quadratic_steady.coefficients, quadratic_data)
    assert derivative[0] == 0.0
    assert np.linalg.norm(derivative) <= 1e-10


def test_perturbed_state_leaves_mass_mode():
    state = perturbed_state(np.eye(5)[0], [1, 3], 0.01)
    np.testing.assert_allclose(state, [1.0, 0.01, 0.0, 0.01, 0.0])
    with pytest.raises(ValueError):
        perturbed_state(np.eye(5)[0], [0], 0.01)
    with pytest.raises(ValueError):
        perturbed_state(np.eye(5)[0], [5], 0.01)


def test_second_mode_decays_at_rate_one_half_without_selection():
    data = spectral_data(zero_selection(), 0.1, K= 8)
    initial = perturbed_state(np.eye(9)[0], [2], 1e-4)
    trajectory = integrate_galerkin(initial, data, 4.0, reference= np.eye(9)[0], snapshot_stride= 1)
    assert trajectory.times[-1] == pytest.approx(4.0)
    assert trajectory.states[-1][2] == pytest.approx(1e-4 * np.exp(-2.0), rel= 1e-3)
    assert np.all(trajectory.parity_leakage == 0.0)
    fit = decay_rate(trajectory)
    assert fit.rate == pytest.approx(0.5, rel= 1e-3)
    assert fit.r_squared == pytest.approx(1.0, abs= 1e-6)


def test_galerkin_decays_to_quadratic_steady_state(quadratic_steady, quadratic_data):
    initial = perturbed_state(quadratic_steady.coefficients, [2, 4], 1e-3)
    trajectory = integrate_galerkin(initial, quadratic_data, 8.0, reference= quadratic_steady.coefficients)
    assert trajectory.distances[-1] < 0.1 * trajectory.distances[0]
    assert np.max(trajectory.parity_leakage) <= 1e-12
    fit = decay_rate(trajectory, quadratic_steady)
    assert fit.rate > 0.0
    assert fit.points >= 3


def test_galerkin_rejects_unpinned_mass(quadratic_data):
    with pytest.raises(ModelDomainError):
        integrate_galerkin(2.0 * np.eye(33)[0], quadratic_data, 1.0)


def test_galerkin_blow_up_guard(quadratic_data):
    with pytest.raises(BlowUpError):
        integrate_galerkin(np.eye(33)[0], quadratic_data, 1.0, blow_up_guard= 0.5)


def test_decay_rate_needs_a_reference_and_samples(quadratic_steady, quadratic_data):
    # ten steps of 0.1 with the default stride leave one snapshot inside the window
    trajectory = integrate_galerkin(quadratic_steady.coefficients, quadratic_data, 1.0)
    with pytest.raises(FitError):
        decay_rate(trajectory)
    with pytest.raises(FitError):
        decay_rate(trajectory, quadratic_steady)


def test_grid_integration_relaxes(quadratic, quadratic_steady, small_grid):
    eps = 0.1
    initial = perturbed_state(quadratic_steady.coefficients, [2], 1e-3)
    start = grid_from_coefficients(initial, small_grid, eps, frame= "q")
    trajectory = integrate_grid(start, quadratic, eps, 3.0, reference= quadratic_steady.coefficients, snapshot_stride= 1)
    assert trajectory.representation == "grid"
    assert trajectory.distances[-1] < 0.5 * trajectory.distances[0]
    assert trajectory.density(-1).mass == pytest.approx(1.0, abs= 1e-12)
    assert np.all(trajectory.states[-1] >= 0.0)
    assert decay_rate(trajectory).rate > 0.0


def test_mass_follows_logistic_law():
    state = integrate_mass(0.5, 0.0, horizon= 5.0)
    expected = 1.0 / (1.0 + np.exp(-state.times))
    np.testing.assert_allclose(state.rho, expected, rtol= 1e-7)


def test_mass_from_selection_trace():
    times = np.linspace(0.0, 20.0, 11)
    state = integrate_mass(1.0, (times, np.full_like(times, 0.25)), r_tilde= 1.0, kappa= 2.0)
    assert state.times[-1] == pytest.approx(20.0)
    assert state.final == pytest.approx(0.375, rel= 1e-6)


def test_mass_domain_errors():
    with pytest.raises(ModelDomainError):
        integrate_mass(0.0, 0.0, horizon= 1.0)
    with pytest.raises(ModelDomainError):
        integrate_mass(1.0, 0.0)


def _rate(m, eps, modes, horizon):
    reference = solve_steady(m, eps)
    data = spectral_data(m, eps)
    initial = perturbed_state(reference.coefficients, modes, 1e-3)
    trajectory = integrate_galerkin(initial, data, horizon, reference= reference.coefficients, max_step= 0.5)
    return decay_rate(trajectory, reference).rate


@pytest.mark.slow
def test_stable_rate_scales_with_eps_squared(quadratic):
    ratio = _rate(quadratic, 0.1, [1, 2], 2.0 / 0.1 ** 2) / _rate(quadratic, 0.05, [1, 2], 2.0 / 0.05 ** 2)
    assert 3.0 <= ratio <= 5.0


@pytest.mark.slow
def test_even_rate_does_not_depend_on_eps(even_quartic):
    ratio = _rate(even_quartic, 0.1, [2, 4], 20.0) / _rate(even_quartic, 0.05, [2, 4], 20.0)
    assert 0.75 <= ratio <= 1.25


def test_pure_reproduction_relaxes_variance(small_grid):
    eps = 0.1
    bump = lambda x, mean, std: np.exp(-0.5 * ((x - mean) / std) ** 2) / (np.sqrt(2.0 * np.pi) * std)
    start = GridDensity.on_grid(lambda x: 0.7 * bump(x, -0.05, 0.08) + 0.3 * bump(x, 0.15, 0.08),
                                small_grid, frame= "q", eps= eps).normalized()
    before = moments_from_grid(start, 2)
    trajectory = integrate_grid(start, zero_selection(), eps, 4.0)
    after = moments_from_grid(trajectory.density(-1), 2)
    # v' = eps^2/2 - v/2, the mean is conserved
    assert after.m1 == pytest.approx(before.m1, abs= 1e-10)
    expected = eps ** 2 + (before.central[2] - eps ** 2) * np.exp(-2.0)
    assert after.central[2] == pytest.approx(expected, rel= 1e-6)


@pytest.mark.slow
def test_galerkin_and_grid_trajectories_agree(quadratic, quadratic_steady, quadratic_data, small_grid):
    initial = perturbed_state(quadratic_steady.coefficients, [1, 2], 0.01)
    galerkin = integrate_galerkin(initial, quadratic_data, 5.0, reference= quadratic_steady.coefficients, max_step= 0.1)
    start = grid_from_coefficients(initial, small_grid, 0.1, frame= "N")
    grid = integrate_grid(start.with_values(np.maximum(start.values, 0.0)), quadratic, 0.1, 5.0,
                          reference= quadratic_steady.coefficients, max_step= 0.1)
    assert grid.times[-1] == pytest.approx(galerkin.times[-1])
    projected = coefficients_from_grid(grid.density(-1), 32)
    assert np.max(np.abs(projected - galerkin.states[-1])) < 1e-6
    assert grid.distances[-1] == pytest.approx(galerkin.distances[-1], abs= 1e-6)


@pytest.mark.parametrize("K", [24, 32])
def test_even_evolution_keeps_odd_modes_at_zero(even_quartic, K):
    reference = solve_steady(even_quartic, 0.1, K= K)
    initial = perturbed_state(reference.coefficients, [2, 4], 1e-3)
    trajectory = integrate_galerkin(initial, spectral_data(even_quartic, 0.1, K= K), 20.0, max_step= 0.1)
    assert np.max(trajectory.parity_leakage) <= 1e-12
    assert np.max(np.abs(trajectory.states[-1][1::2])) <= 1e-12
