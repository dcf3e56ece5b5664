import sys
import numpy as np
import scipy.linalg
from typing import Optional

from src.logger import logging
from src.exception import (CustomException, SingularOperatorError, DegeneratePivotError, NoRealRootError,
                           DivergenceError, InadmissibleError, NumericError)
from src.constants import (STEADY_CONDITION_LIMIT, STEADY_DEGENERATE_PIVOT, STEADY_DIVERGENCE_STREAK,
                           STEADY_RESIDUAL_FACTOR, STEADY_GRID_TOLERANCE, STEADY_MAX_ITERATIONS, STEADY_GRID_MAX_ITERATIONS,
                           STEADY_GRID_DAMPING, STEADY_KAPPA, STEADY_R_TILDE, GRID_BOUNDARY_TOLERANCE)
from src.components.operators import reproduction_spectral, reproduction_grid, coefficient_residual
from src.entity.config_entity import SteadyProblem, GridConfig
from src.entity.selection import SelectionFunction
from src.entity.artifact_entity import SpectralSelectionData, SteadySolution, GridDensity


def assemble_L(data: SpectralSelectionData) -> np.ndarray:
    """
    Linear part of the steady equations on the modes 2..K:
    L[k, l] = (2^{1-k} - 1 + m_0) delta_{kl} - M[k, l].
    """
    K = data.truncation
    k = np.arange(2, K + 1)
    return np.diag(2.0 ** (1 - k) - 1.0 + data.m0) - data.matrix[2:, 2:]


def measure_k0(data: SpectralSelectionData) -> Optional[int]:
    """
    Smallest k0 >= 0 with min(m_eps) + 1 >= 2^-(k0+1), the minimum taken over
    the quadrature nodes. None when min(m_eps) + 1 <= 0.
    """
    floor = data.node_minimum + 1.0
    if floor <= 0.0:
        logging.warning(f"min m_eps + 1 = {floor:.3e} <= 0: no k0 exists for {data.selection_name} at eps={data.eps}")
        return None
    k0 = 0
    while floor < 2.0 ** -(k0 + 1):
        k0 += 1
    return k0


def solve_L(L: np.ndarray, rhs, k0: Optional[int] = None) -> np.ndarray:
    """
    Dense solve of L x = rhs.

    When k0 is given, the a-priori bound |x| <= 2^{k0+2} |rhs| is checked and a
    violation is logged as a warning.

    Raises
    ------
    SingularOperatorError
        If the condition number of L exceeds the configured limit.
    """
    rhs = np.asarray(rhs, dtype= float)
    condition = np.linalg.cond(L)
    if not np.isfinite(condition) or condition > STEADY_CONDITION_LIMIT:
        raise SingularOperatorError(f"L is near-singular (condition number {condition:.3e})")

    try:
        solution = scipy.linalg.solve(L, rhs)
    except scipy.linalg.LinAlgError as e:
        raise SingularOperatorError(f"dense solve of L failed: {e}") from e
    except Exception as e:
        raise CustomException(e, sys) from e
    if k0 is not None:
        bound = 2.0 ** (k0 + 2) * np.linalg.norm(rhs)
        if np.linalg.norm(solution) > bound * (1.0 + 1e-12):
            logging.warning(f"|L^-1 rhs| = {np.linalg.norm(solution):.3e} exceeds 2^(k0+2)|rhs| = {bound:.3e} (k0={k0})")
    return solution


def alpha1_root(tail, data: SpectralSelectionData) -> float:
    """
    The admissible (small) root of m_1 a^2 + (D + m_b) a = m_1 + m~_b, where
    m_b = sum_{l>=2} alpha_l m_l and m~_b = sum_{l>=2} alpha_l M[1, l].

    Raises
    ------
    DegeneratePivotError
        In the linear branch, when D + m_b vanishes but the right side does not.
    NoRealRootError
        When the discriminant is negative (eps too large).
    """
    tail = np.asarray(tail, dtype= float)
    m1 = float(data.coefficients[1])
    m_beta = float(np.dot(tail, data.coefficients[2:]))
    m_beta_tilde = float(np.dot(tail, data.matrix[1, 2:]))
    b = data.d_eps + m_beta
    c = m1 + m_beta_tilde

    if abs(m1) < STEADY_DEGENERATE_PIVOT:
        if abs(b) < STEADY_DEGENERATE_PIVOT:
            # 0 = 0: no selection gradient, the mean stays where the iteration starts
            if abs(c) < STEADY_DEGENERATE_PIVOT:
                return 0.0
            raise DegeneratePivotError(f"D + m_beta = {b:.3e} vanishes with right side {c:.3e}")
        return c / b

    discriminant = b * b + 4.0 * m1 * c
    if discriminant < 0.0:
        raise NoRealRootError(f"alpha_1 equation has no real root (discriminant {discriminant:.3e}); eps={data.eps} is too large")
    sign = 1.0 if b >= 0.0 else -1.0
    return 2.0 * c / (b + sign * np.sqrt(discriminant))


def q_map(tail, alpha1: float, data: SpectralSelectionData) -> np.ndarray:
    """
    Nonlinear part Q_k, k = 2..K: the reproduction product restricted to
    l = 1..k-1, plus alpha_k sum_{l>=1} alpha_l m_l, minus alpha_1 M[1, k].
    """
    tail = np.asarray(tail, dtype= float)
    K = data.truncation
    shifted = np.concatenate(([0.0, alpha1], tail))
    bilinear = reproduction_spectral(shifted, shifted, K)[2:]
    drift = alpha1 * data.coefficients[1] + np.dot(tail, data.coefficients[2:])
    return bilinear + tail * drift - alpha1 * data.matrix[1, 2:]


def steady_mass(coefficients, data: SpectralSelectionData, r_tilde: float = STEADY_R_TILDE, kappa: float = STEADY_KAPPA) -> float:
    """rho = (r~ - int m q) / kappa with int m q = sum_l alpha_l m_l."""
    return (r_tilde - float(np.dot(coefficients, data.coefficients))) / kappa


def steady_fixed_point(problem: SteadyProblem,
                       r_tilde: float = STEADY_R_TILDE,
                       kappa: float = STEADY_KAPPA,
                       table: Optional[np.ndarray] = None) -> SteadySolution:
    """
    Spectral steady state: iterate tail <- L^-1 (m_2 - Q(tail, alpha_1(tail)))
    from tail = 0 until the l2 update is below the tolerance, then certify the
    full coefficient residual.

    Parameters
    ----------
    problem : SteadyProblem
        Selection data, truncation and iteration controls.
    r_tilde, kappa : float
        Demographic parameters for the steady mass.
    table : np.ndarray, optional
        Replacement product table for the residual certificate.

    Raises
    ------
    DivergenceError
        If the update grows for several consecutive iterations, the iteration
        cap is reached, or the residual certificate fails.
    """
    data = problem.data
    K = problem.truncation
    if data.truncation != K:
        raise ValueError(f"selection data truncated at {data.truncation}, problem at {K}")

    L = assemble_L(data)
    k0 = measure_k0(data)
    source = data.coefficients[2:]
    tail = np.zeros(K - 1)
    updates, streak = [], 0

    logging.info(f"spectral steady solve for {data.selection_name}: eps={data.eps}, K={K}, tol={problem.tolerance:.1e}")
    for iteration in range(1, problem.max_iterations + 1):
        alpha1 = alpha1_root(tail, data)
        candidate = solve_L(L, source - q_map(tail, alpha1, data), k0 if iteration == 1 else None)
        candidate = (1.0 - problem.damping) * tail + problem.damping * candidate

        update = float(np.linalg.norm(candidate - tail))
        streak = streak + 1 if updates and update > updates[-1] else 0
        updates.append(update)
        tail = candidate
        logging.debug(f"iteration {iteration}: update {update:.3e}")

        if streak >= STEADY_DIVERGENCE_STREAK or not np.isfinite(update):
            error = DivergenceError(
                f"fixed point not contracting at eps={data.eps}: update grew {streak} times in a row "
                f"(trace {', '.join(f'{u:.2e}' for u in updates[-5:])})")
            error.trace = updates
            raise error
        if update < problem.tolerance:
            break
    else:
        error = DivergenceError(f"no convergence in {problem.max_iterations} iterations at eps={data.eps} (last update {updates[-1]:.3e})")
        error.trace = updates
        raise error

    alpha1 = alpha1_root(tail, data)
    coefficients = np.concatenate(([1.0, alpha1], tail))
    residual = float(np.linalg.norm(coefficient_residual(coefficients, data, table)))
    if residual > STEADY_RESIDUAL_FACTOR * problem.tolerance:
        raise DivergenceError(f"residual certificate failed: {residual:.3e} > {STEADY_RESIDUAL_FACTOR} x {problem.tolerance:.1e}")

    constant = max(abs(alpha1) / data.eps, np.linalg.norm(tail) / data.eps ** 2)
    if constant > problem.neighborhood_constant:
        logging.warning(f"steady state outside the neighborhood: measured C={constant:.3g} > {problem.neighborhood_constant}")

    solution = SteadySolution(
        coefficients= coefficients,
        residual= residual,
        iterations= iteration,
        eps= data.eps,
        rho_bar= steady_mass(coefficients, data, r_tilde, kappa),
        neighborhood_constant= float(constant),
        k0= k0,
        update_norms= updates,
        selection_name= data.selection_name,
    )
    logging.info(f"converged in {iteration} iterations: alpha_1={alpha1:.3e}, |tail|={np.linalg.norm(tail):.3e}, residual={residual:.2e}")
    return solution


def steady_grid_oracle(m: SelectionFunction,
                       eps: float,
                       grid: GridConfig,
                       tol: float = STEADY_GRID_TOLERANCE,
                       max_iterations: int = STEADY_GRID_MAX_ITERATIONS,
                       damping: float = STEADY_GRID_DAMPING) -> GridDensity:
    """
    Independent steady state on the q-frame grid by the damped iteration

        q <- (1 - theta) q + theta T_eps[q] / (1 + m - int m q),

    renormalized each step, started from G_eps at the extremum of m.

    Raises
    ------
    InadmissibleError
        If 1 + m - int m q <= 0 somewhere on the support of q.
    DivergenceError
        If the L1 update is still above `tol` after `max_iterations`.
    """
    center = m.extremum
    q = GridDensity.on_grid(lambda x: np.exp(-0.5 * ((x - center) / eps) ** 2) / (np.sqrt(2.0 * np.pi) * eps),
                            grid, frame= "q", eps= eps).normalized()
    m_values = m(q.points)
    logging.info(f"grid steady oracle for {m.name}: eps={eps}, N={q.size}, damping={damping}")

    update = np.inf
    for iteration in range(1, max_iterations + 1):
        selection_average = float(q.spacing * np.dot(m_values, q.values))
        denominator = 1.0 + m_values - selection_average
        support = q.values > GRID_BOUNDARY_TOLERANCE * q.values.max()
        if np.any(denominator[support] <= 0.0):
            where = q.points[support][denominator[support] <= 0.0]
            raise InadmissibleError(
                f"1 + m - int(mq) <= 0 on the support near x={where[0]:.4g} (int mq = {selection_average:.4g}): "
                f"no concentrated steady state at this extremum")

        reproduced = reproduction_grid(q, eps, grid.convolution).values
        target = np.where(denominator > 0.0, reproduced / np.where(denominator > 0.0, denominator, 1.0), 0.0)
        candidate = q.with_values((1.0 - damping) * q.values + damping * target).normalized()
        if not np.all(np.isfinite(candidate.values)):
            raise NumericError(f"non-finite density in grid oracle iteration {iteration}")

        update = float(q.spacing * np.sum(np.abs(candidate.values - q.values)))
        q = candidate
        logging.debug(f"oracle iteration {iteration}: L1 update {update:.3e}")
        if update < tol:
            logging.info(f"grid oracle converged in {iteration} iterations")
            return q

    raise DivergenceError(f"grid oracle did not converge in {max_iterations} iterations (last L1 update {update:.3e})")
