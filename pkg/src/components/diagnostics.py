import numpy as np
import pandas as pd
from typing import Union
from scipy.integrate import trapezoid
from scipy.special import comb, gammaln

from src.logger import logging
from src.exception import RangeError, FitOverflowError, NumericError
from src.constants import (DIAGNOSTICS_DEFAULT_MOMENT_ORDER, DIAGNOSTICS_MAX_MOMENT_ORDER, DIAGNOSTICS_TAIL_TOLERANCE,
                           DIAGNOSTICS_TAIL_DIVERGENCE, GRID_MASS_TOLERANCE, GRID_BOUNDARY_BAND)
from src.components.hermite_core import gaussian_moment, hermite_table, synthesize
from src.entity.config_entity import GridConfig
from src.entity.artifact_entity import GridDensity, MomentVector, SteadySolution


def _check_order(k_max: int) -> None:
    if k_max < 1 or k_max > DIAGNOSTICS_MAX_MOMENT_ORDER:
        raise RangeError(f"moment order {k_max} outside 1..{DIAGNOSTICS_MAX_MOMENT_ORDER}")


def moments_from_grid(q: GridDensity, k_max: int = DIAGNOSTICS_DEFAULT_MOMENT_ORDER, absolute: bool = False) -> MomentVector:
    """
    Mass, mean and central moments of a grid density by the trapezoid rule.

    Central moments are normalized by the mass. Visible tail mass next to the
    boundary sets `truncation_warning` on the result.
    """
    _check_order(k_max)
    x, v = q.points, q.values
    peak = float(np.max(np.abs(v))) or 1.0
    band = GRID_BOUNDARY_BAND
    truncated = max(np.max(np.abs(v[:band])), np.max(np.abs(v[-band:]))) > DIAGNOSTICS_TAIL_TOLERANCE * peak
    if truncated:
        logging.warning("density tails are visible at the grid boundary: moments are truncated")

    m0 = float(trapezoid(v, dx= q.spacing))
    if abs(m0 - 1.0) > GRID_MASS_TOLERANCE:
        logging.warning(f"moments of a density with mass {m0:.8f}")
    m1 = float(trapezoid(x * v, dx= q.spacing)) / m0
    centered = x - m1

    central = np.array([float(trapezoid(centered ** k * v, dx= q.spacing)) / m0 for k in range(k_max + 1)])
    central[0], central[1] = 1.0, 0.0
    magnitudes = None
    if absolute:
        magnitudes = np.array([float(trapezoid(np.abs(centered) ** k * v, dx= q.spacing)) / m0 for k in range(k_max + 1)])
    return MomentVector(frame= q.frame, eps= q.eps, m0= m0, m1= m1, central= central, absolute= magnitudes,
                        truncation_warning= bool(truncated))


def _raw_coefficient(l: int, j: int) -> float:
    # (x^l, H_j)_G / sigma_{l-j} = l! / ((l-j)! sqrt(j!))
    return float(np.exp(gammaln(l + 1.0) - gammaln(l - j + 1.0) - 0.5 * gammaln(j + 1.0)))


def _raw_moment(alpha: np.ndarray, l: int) -> float:
    return sum(_raw_coefficient(l, j) * alpha[j] * gaussian_moment(l - j) for j in range(min(l, alpha.size - 1) + 1))


def lemma_remainder(alpha, k: int) -> float:
    """
    R(k) in M~_k = sigma_k + sqrt(k!) alpha_k + R(k): the recentering terms in
    powers of the mean alpha_1, plus the cross terms alpha_j sigma_{k-j}, 0 < j < k.
    """
    alpha = np.asarray(alpha, dtype= float)
    mean = float(alpha[1]) if alpha.size > 1 else 0.0
    recentering = sum(comb(k, l, exact= True) * (-mean) ** (k - l) * _raw_moment(alpha, l) for l in range(k))
    cross = sum(_raw_coefficient(k, j) * alpha[j] * gaussian_moment(k - j) for j in range(1, min(k - 1, alpha.size - 1) + 1))
    return float(recentering + cross)


def moments_from_coeffs(alpha, k_max: int = DIAGNOSTICS_DEFAULT_MOMENT_ORDER, eps: float = 1.0) -> MomentVector:
    """
    N-frame moments of N = (sum alpha_k H_k) G with alpha_0 = 1: the mean is
    alpha_1 and M~_k = sigma_k + sqrt(k!) alpha_k + R(k) for k >= 2.
    """
    _check_order(k_max)
    alpha = np.asarray(alpha, dtype= float)
    central = np.zeros(k_max + 1)
    central[0] = 1.0
    for k in range(2, k_max + 1):
        alpha_k = alpha[k] if k < alpha.size else 0.0
        central[k] = gaussian_moment(k) + np.exp(0.5 * gammaln(k + 1.0)) * alpha_k + lemma_remainder(alpha, k)
    return MomentVector(frame= "N", eps= eps, m0= float(alpha[0]), m1= float(alpha[1]) if alpha.size > 1 else 0.0,
                        central= central)


def convert_frame(M: MomentVector, eps: float, target: str) -> MomentVector:
    """Exact change of frame: M_1 scales by eps^{+-1}, central moments of order k by eps^{+-k}."""
    if target == M.frame:
        return M
    power = 1.0 if target == "q" else -1.0
    scale = eps ** (power * np.arange(M.central.size))
    absolute = None if M.absolute is None else M.absolute * scale
    return MomentVector(frame= target, eps= eps, m0= M.m0, m1= M.m1 * eps ** power, central= M.central * scale,
                        absolute= absolute, truncation_warning= M.truncation_warning)


def coefficients_from_grid(q: GridDensity, K: int) -> np.ndarray:
    """Hermite coefficients alpha_k = int N H_k dx of a grid density, taken in the N-frame."""
    n = q.to_frame("N")
    if not np.all(np.isfinite(n.values)):
        raise NumericError("non-finite density values cannot be projected")
    return hermite_table(K, n.points) @ (n.trapezoid_weights * n.values)


def grid_from_coefficients(alpha, grid: GridConfig, eps: float, frame: str = "N") -> GridDensity:
    """Synthesize N = (sum alpha_k H_k) G on the N-frame grid, converted to `frame`."""
    gauss = lambda x: np.exp(-0.5 * x ** 2) / np.sqrt(2.0 * np.pi)
    density = GridDensity.on_grid(lambda x: synthesize(alpha, x) * gauss(x), grid, frame= "N", eps= eps)
    return density.to_frame(frame)


def _moments_of(source, eps: float, k_max: int) -> MomentVector:
    if isinstance(source, MomentVector):
        return source
    if isinstance(source, GridDensity):
        return moments_from_grid(source, k_max)
    coefficients = source.coefficients if isinstance(source, SteadySolution) else np.asarray(source, dtype= float)
    return moments_from_coeffs(coefficients, k_max, eps)


def concentration_table(source: Union[SteadySolution, np.ndarray, GridDensity, MomentVector],
                        eps: float,
                        k_max: int = DIAGNOSTICS_DEFAULT_MOMENT_ORDER,
                        frame: str = "q") -> pd.DataFrame:
    """
    Concentration ratios of a steady density.

    Rows k = 2..k_max hold M_k, the Gaussian value eps^k sigma_k and the
    normalized deviation |M_k - eps^k sigma_k| / eps^{k+2} (the empirical C_k).
    Row k = 1 holds the mean and |M_1| / eps^2. In the N-frame the same ratios
    read |M~_k - sigma_k| / eps^2 and |M~_1| / eps, so both frames agree.
    """
    moments = convert_frame(_moments_of(source, eps, k_max), eps, frame)
    q_frame = frame == "q"

    rows = [{"k": 1, "central_moment": moments.m1, "gaussian_value": 0.0,
             "deviation_ratio": abs(moments.m1) / (eps ** 2 if q_frame else eps)}]
    for k in range(2, k_max + 1):
        gaussian_value = (eps ** k if q_frame else 1.0) * gaussian_moment(k)
        deviation = abs(moments.central[k] - gaussian_value)
        rows.append({"k": k, "central_moment": float(moments.central[k]), "gaussian_value": gaussian_value,
                     "deviation_ratio": deviation / (eps ** (k + 2) if q_frame else eps ** 2)})
    return pd.DataFrame(rows)


def gaussian_distance(source: Union[SteadySolution, np.ndarray, GridDensity], eps: float = 1.0, K: int = 32) -> float:
    """
    sqrt(sum_{k>=2} alpha_k^2), the L2(G_eps^-1) distance of q to the tilted
    Gaussian G_eps (1 + M_1 x / eps^2). Grid densities are projected first.
    """
    if isinstance(source, GridDensity):
        coefficients = coefficients_from_grid(source, K)
    elif isinstance(source, SteadySolution):
        coefficients = source.coefficients
    else:
        coefficients = np.asarray(source, dtype= float)
    return float(np.linalg.norm(coefficients[2:]))


def tail_exponential_moment(q: GridDensity, eps: float, delta_prime: float) -> float:
    """
    int q(y) exp(delta' y^2 / eps^2) dy by the trapezoid rule (the empirical A_1).

    Raises
    ------
    FitOverflowError
        If the integrand does not decay at the grid boundary (delta' too large).
    """
    n = q.to_frame("N")
    with np.errstate(over= "ignore", invalid= "ignore"):
        integrand = n.values * np.exp(delta_prime * n.points ** 2)
    if not np.all(np.isfinite(integrand)):
        raise FitOverflowError(f"tail integrand overflows for delta'={delta_prime}")
    peak = float(np.max(np.abs(integrand)))
    band = GRID_BOUNDARY_BAND
    edge = float(max(np.max(np.abs(integrand[:band])), np.max(np.abs(integrand[-band:]))))
    if peak == 0.0 or edge > DIAGNOSTICS_TAIL_DIVERGENCE * peak:
        raise FitOverflowError(f"tail integrand does not decay on the grid for delta'={delta_prime} (edge/peak = {edge / max(peak, 1e-300):.2e})")
    return float(trapezoid(integrand, dx= n.spacing))
