import sys
import numpy as np
from typing import Callable, Iterable, Optional, Tuple, Union
from scipy.integrate import solve_ivp
from scipy.stats import linregress

from src.logger import logging
from src.exception import CustomException, BlowUpError, StepSizeError, FitError, ModelDomainError, NumericError
from src.constants import (DYNAMICS_MAX_STEP, DYNAMICS_GROWTH_STEP_CONSTANT, DYNAMICS_BLOW_UP_GUARD,
                           DYNAMICS_NEGATIVITY_TOLERANCE, DYNAMICS_POSITIVITY_SAFETY, DYNAMICS_FIT_WINDOW,
                           DYNAMICS_SNAPSHOT_STRIDE, DIAGNOSTICS_MAX_MOMENT_ORDER, GRID_CONVOLUTION_METHOD,
                           STEADY_KAPPA, STEADY_R_TILDE)
from src.components.hermite_core import hermite_table, pad
from src.components.operators import coefficient_residual, reproduction_grid
from src.entity.selection import SelectionFunction
from src.entity.artifact_entity import (SpectralSelectionData, GridDensity, Trajectory, MassState, DecayFit,
                                        SteadySolution)


def rk4_step(dt: float, state: np.ndarray, rhs: Callable, *args) -> np.ndarray:
    """
    Classical fourth-order Runge-Kutta step.

    Args:
        dt (float): time step.
        state (np.ndarray): current state vector.
        rhs (callable): right-hand side rhs(state, *args).
        *args: extra arguments forwarded to rhs.
    """
    k1 = rhs(state, *args)
    k2 = rhs(state + 0.5 * dt * k1, *args)
    k3 = rhs(state + 0.5 * dt * k2, *args)
    k4 = rhs(state + dt * k3, *args)
    return state + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def galerkin_rhs(alpha, data: SpectralSelectionData, table: Optional[np.ndarray] = None) -> np.ndarray:
    """
    Truncated coefficient dynamics d alpha_k/dt for k <= K; the mass mode
    is pinned (d alpha_0/dt = 0).
    """
    derivative = coefficient_residual(alpha, data, table)
    derivative[0] = 0.0
    return derivative


def _odd_leakage(alpha: np.ndarray) -> float:
    return float(np.max(np.abs(alpha[1::2]))) if alpha.size > 1 else 0.0


def perturbed_state(reference, modes: Iterable[int], amplitude: float) -> np.ndarray:
    """reference + amplitude * sum_k e_k over the given modes (k >= 1, mass mode untouched)."""
    alpha = np.array(reference, dtype= float)
    for k in modes:
        if k < 1 or k >= alpha.size:
            raise ValueError(f"perturbation mode {k} outside 1..{alpha.size - 1}")
        alpha[k] += amplitude
    return alpha


def integrate_galerkin(initial,
                       data: SpectralSelectionData,
                       horizon: float,
                       reference: Optional[np.ndarray] = None,
                       max_step: float = DYNAMICS_MAX_STEP,
                       growth_constant: float = DYNAMICS_GROWTH_STEP_CONSTANT,
                       blow_up_guard: float = DYNAMICS_BLOW_UP_GUARD,
                       snapshot_stride: int = DYNAMICS_SNAPSHOT_STRIDE) -> Trajectory:
    """
    RK4 integration of the truncated coefficient system up to `horizon`.

    The step is min(max_step, growth_constant/|alpha|) to respect the cubic
    growth of the energy bound; alpha_0 is reset to 1 after every step. When
    a reference is given, |alpha(t) - reference| is recorded at every snapshot.

    Raises
    ------
    BlowUpError
        If |alpha| exceeds `blow_up_guard` or becomes non-finite.
    """
    alpha = pad(initial, data.truncation)
    if abs(alpha[0] - 1.0) > 1e-12:
        raise ModelDomainError(f"initial alpha_0 = {alpha[0]} but the mass mode is pinned to 1")
    alpha[0] = 1.0
    ref = None if reference is None else pad(reference, data.truncation)

    times, states, distances, leakage, averages = [], [], [], [], []

    def record(t, state):
        times.append(t)
        states.append(state.copy())
        leakage.append(_odd_leakage(state))
        averages.append(float(np.dot(state, data.coefficients)))
        if ref is not None:
            distances.append(float(np.linalg.norm(state - ref)))

    logging.info(f"Galerkin integration: eps={data.eps}, K={data.truncation}, horizon={horizon:g}")
    t, steps = 0.0, 0
    record(t, alpha)
    while t < horizon * (1.0 - 1e-12):
        dt = min(max_step, growth_constant / np.linalg.norm(alpha), horizon - t)
        alpha = rk4_step(dt, alpha, galerkin_rhs, data)
        alpha[0] = 1.0
        t += dt
        steps += 1

        norm = np.linalg.norm(alpha)
        if not np.isfinite(norm) or norm > blow_up_guard:
            raise BlowUpError(f"Galerkin state norm {norm:.3e} left the guard {blow_up_guard:.1e} at t={t:.4g}")
        if steps % snapshot_stride == 0 or t >= horizon * (1.0 - 1e-12):
            record(t, alpha)

    logging.info(f"Galerkin integration completed in {steps} steps")
    return Trajectory(
        times= np.array(times),
        states= states,
        representation= "coefficients",
        eps= data.eps,
        distances= np.array(distances) if ref is not None else None,
        mass_drift= np.zeros(len(times)),
        parity_leakage= np.array(leakage),
        selection_average= np.array(averages),
        mean_trace= np.array([s[1] for s in states]),
        steps= steps,
    )


def _grid_rhs(values: np.ndarray, q: GridDensity, m_values: np.ndarray, eps: float, method: str) -> np.ndarray:
    density = q.with_values(values)
    selection_average = density.spacing * np.dot(m_values, values)
    return reproduction_grid(density, eps, method).values - values - (m_values - selection_average) * values


def integrate_grid(initial: GridDensity,
                   m: SelectionFunction,
                   eps: float,
                   horizon: float,
                   reference: Optional[np.ndarray] = None,
                   max_step: float = DYNAMICS_MAX_STEP,
                   snapshot_stride: int = DYNAMICS_SNAPSHOT_STRIDE,
                   method: str = GRID_CONVOLUTION_METHOD) -> Trajectory:
    """
    RK4 integration of dq/dt = T_eps[q] - q - (m - int m q) q on a fixed grid.

    The step obeys dt * max(1 + m - int m q) <= safety < 1 so that explicit
    steps keep the density nonnegative. Mass is renormalized after each step
    and the pre-normalization drift per unit time is recorded. A reference
    coefficient vector (N-frame) gives the distance trace via Hermite projection.

    Raises
    ------
    StepSizeError
        If a step produces values below -1e-10.
    """
    q = initial.normalized()
    scale = eps if q.frame == "N" else 1.0
    m_values = m(q.points * scale)
    if not np.all(np.isfinite(m_values)):
        raise NumericError(f"{m.name} is not finite on the grid")

    # projection onto H_k in the N-frame: alpha_k = int N H_k dx
    n_frame = q.to_frame("N")
    K = DIAGNOSTICS_MAX_MOMENT_ORDER if reference is None else np.asarray(reference).size - 1
    basis_table = hermite_table(K, n_frame.points) * n_frame.trapezoid_weights
    to_n = eps if q.frame == "q" else 1.0

    def project(values):
        return basis_table @ (values * to_n)

    times, states, distances, leakage, averages, means, drifts = [], [], [], [], [], [], []

    def record(t, values, drift):
        times.append(t)
        states.append(values.copy())
        drifts.append(drift)
        averages.append(float(q.spacing * np.dot(m_values, values)))
        means.append(float(q.spacing * np.dot(q.points, values)))
        coefficients = project(values)
        leakage.append(_odd_leakage(coefficients))
        if reference is not None:
            distances.append(float(np.linalg.norm(coefficients - reference)))

    logging.info(f"grid integration: {m.name}, eps={eps}, N={q.size}, frame={q.frame}, horizon={horizon:g}")
    values = q.values.copy()
    t, steps, drift = 0.0, 0, 0.0
    record(t, values, drift)
    while t < horizon * (1.0 - 1e-12):
        selection_average = q.spacing * np.dot(m_values, values)
        rate = float(np.max(1.0 + m_values - selection_average))
        dt = min(max_step, horizon - t)
        if rate > 0.0:
            dt = min(dt, DYNAMICS_POSITIVITY_SAFETY / rate)

        values = rk4_step(dt, values, _grid_rhs, q, m_values, eps, method)
        if values.min() < -DYNAMICS_NEGATIVITY_TOLERANCE:
            raise StepSizeError(f"density reached {values.min():.3e} at t={t + dt:.4g} (dt={dt:.3g})")
        values = np.maximum(values, 0.0)

        mass = q.spacing * np.sum(values)
        drift = max(drift, abs(mass - 1.0) / dt)
        values = values / mass
        t += dt
        steps += 1
        if steps % snapshot_stride == 0 or t >= horizon * (1.0 - 1e-12):
            record(t, values, drift)
            drift = 0.0

    logging.info(f"grid integration completed in {steps} steps, max drift rate {max(drifts):.2e}")
    return Trajectory(
        times= np.array(times),
        states= states,
        representation= "grid",
        eps= eps,
        distances= np.array(distances) if reference is not None else None,
        mass_drift= np.array(drifts),
        parity_leakage= np.array(leakage),
        selection_average= np.array(averages),
        mean_trace= np.array(means),
        grid_origin= q.origin,
        grid_spacing= q.spacing,
        frame= q.frame,
        steps= steps,
    )


def integrate_mass(rho0: float,
                   selection_trace: Union[float, Callable, Tuple[np.ndarray, np.ndarray]],
                   r_tilde: float = STEADY_R_TILDE,
                   kappa: float = STEADY_KAPPA,
                   horizon: Optional[float] = None,
                   samples: int = 201) -> MassState:
    """
    Solve rho' = rho (r~ - int m q(t)) - kappa rho^2.

    `selection_trace` is a constant, a callable t -> int m q(t), or a pair
    (times, values) taken from a Trajectory and interpolated linearly (held
    constant after the last sample).
    """
    if not rho0 > 0:
        raise ModelDomainError(f"initial mass must be positive, got {rho0}")

    if callable(selection_trace):
        average = selection_trace
    elif isinstance(selection_trace, tuple):
        trace_times, trace_values = (np.asarray(v, dtype= float) for v in selection_trace)
        average = lambda t: float(np.interp(t, trace_times, trace_values))
        horizon = float(trace_times[-1]) if horizon is None else horizon
    else:
        constant = float(selection_trace)
        average = lambda t: constant
    if horizon is None:
        raise ModelDomainError("a horizon is required for a constant or callable selection trace")

    try:
        times = np.linspace(0.0, horizon, samples)
        solution = solve_ivp(lambda t, rho: rho * (r_tilde - average(t)) - kappa * rho ** 2,
                             (0.0, horizon), [rho0], t_eval= times, rtol= 1e-10, atol= 1e-12)
        if not solution.success:
            raise RuntimeError(solution.message)
        return MassState(times= solution.t, rho= np.maximum(solution.y[0], 0.0), r_tilde= r_tilde, kappa= kappa)
    except Exception as e:
        raise CustomException(e, sys) from e


def decay_rate(trajectory: Trajectory,
               reference: Optional[Union[SteadySolution, np.ndarray]] = None,
               window: Tuple[float, float] = DYNAMICS_FIT_WINDOW) -> DecayFit:
    """
    Exponential rate lambda of |beta(t)| = |alpha(t) - alpha_inf| by least
    squares on log|beta| over the window [lo T, hi T].

    Distances are recomputed from the states when a reference is given and
    the trajectory holds coefficients; otherwise the recorded trace is used.

    Raises
    ------
    FitError
        If the window holds fewer than three points, a nonpositive or
        non-decreasing distance, or the fitted slope is not negative.
    """
    distances = trajectory.distances
    if reference is not None and trajectory.representation == "coefficients":
        ref = reference.coefficients if isinstance(reference, SteadySolution) else np.asarray(reference)
        distances = np.array([np.linalg.norm(state - pad(ref, state.size - 1)) for state in trajectory.states])
    if distances is None:
        raise FitError("trajectory carries no distance trace and no reference was given")

    horizon = trajectory.times[-1]
    inside = (trajectory.times >= window[0] * horizon) & (trajectory.times <= window[1] * horizon)
    t, d = trajectory.times[inside], np.asarray(distances)[inside]
    if t.size < 3:
        raise FitError(f"only {t.size} samples inside the fit window {window}")
    if np.any(d <= 0.0) or np.any(np.diff(d) >= 0.0):
        raise FitError("distance to the reference is not positive and strictly decreasing inside the fit window")

    fit = linregress(t, np.log(d))
    if fit.slope >= 0.0:
        raise FitError(f"nonnegative log-slope {fit.slope:.3e}")
    return DecayFit(rate= float(-fit.slope), r_squared= float(fit.rvalue ** 2),
                    window= (float(t[0]), float(t[-1])), points= int(t.size))
