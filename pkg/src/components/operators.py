import sys
import numpy as np
from functools import lru_cache
from typing import Optional, Tuple
from scipy.special import comb, gammaln
from scipy.signal import fftconvolve

from src.logger import logging
from src.exception import CustomException, NumericError, DomainTooSmallError, RangeError
from src.constants import GRID_BOUNDARY_TOLERANCE, GRID_BOUNDARY_BAND, GRID_CONVOLUTION_METHOD
from src.components.hermite_core import HermiteBasis, QuadratureRule, hermite_table, scaled_gaussian_moment, pad
from src.entity.selection import SelectionFunction
from src.entity.artifact_entity import GridDensity, MomentVector, SpectralSelectionData


@lru_cache(maxsize= 8)
def _product_table(K: int) -> np.ndarray:
    k = np.arange(K + 1, dtype= float)[:, None]
    l = np.arange(K + 1, dtype= float)[None, :]
    valid = l <= k
    log_binomial = gammaln(k + 1.0) - gammaln(l + 1.0) - gammaln(np.where(valid, k - l, 0.0) + 1.0)
    table = np.where(valid, np.exp(0.5 * log_binomial - k * np.log(2.0)), 0.0)
    table.setflags(write= False)
    return table


def product_coefficients(K: int) -> np.ndarray:
    """Lower-triangular table c[k, l] = sqrt(binom(k, l)) / 2^k for 0 <= l <= k <= K."""
    return _product_table(int(K))


def reproduction_spectral(alpha, beta, K: Optional[int] = None, table: Optional[np.ndarray] = None) -> np.ndarray:
    """
    Hermite coefficients of the reproduction product of sum alpha_k H_k and
    sum beta_k H_k: gamma_k = sum_l c[k, l] alpha_l beta_{k-l}, modes k > K dropped.

    `table` replaces the product table (used by the validation suite to check
    that a corrupted table is detected).
    """
    alpha = np.asarray(alpha, dtype= float)
    beta = np.asarray(beta, dtype= float)
    K = max(alpha.size, beta.size) - 1 if K is None else int(K)
    a, b = pad(alpha, K), pad(beta, K)
    c = product_coefficients(K) if table is None else table

    gamma = np.empty(K + 1)
    for k in range(K + 1):
        gamma[k] = np.dot(c[k, :k + 1], a[:k + 1] * b[k::-1])
    return gamma


def selection_data(m: SelectionFunction, eps: float, basis: HermiteBasis, rule: QuadratureRule) -> SpectralSelectionData:
    """
    Quadrature data of m_eps(x) = m(eps x): coefficients m_k = (m_eps, H_k)_G and
    the symmetric matrix M[k, l] = (H_l, m_eps H_k)_G for k, l <= K.

    Raises
    ------
    NumericError
        If m is not finite at a scaled quadrature node.
    """
    values = np.asarray(m(eps * rule.nodes), dtype= float)
    if not np.all(np.isfinite(values)):
        raise NumericError(f"{m.name} is not finite at {np.count_nonzero(~np.isfinite(values))} scaled quadrature nodes (eps={eps})")

    H = hermite_table(basis.max_degree, rule.nodes)
    matrix = (H * (rule.weights * values)) @ H.T
    matrix = 0.5 * (matrix + matrix.T)
    data = SpectralSelectionData(
        eps= float(eps),
        coefficients= matrix[:, 0].copy(),
        matrix= matrix,
        m0= float(matrix[0, 0]),
        norm= float(np.sqrt(np.dot(rule.weights, values ** 2))),
        m1_abs= float(abs(matrix[1, 0])),
        node_minimum= float(values.min()),
        selection_name= m.name,
    )
    logging.debug(f"selection data for {m.name} at eps={eps}: m0={data.m0:.3e}, |m_eps|={data.norm:.3e}, |m1|={data.m1_abs:.3e}")
    return data


def d_epsilon(data: SpectralSelectionData, m: SelectionFunction) -> Tuple[float, float]:
    """
    D = (H_0, m_eps H_0) - (H_1, m_eps H_1) and its leading-order value
    eps^2 m''(0)/2 (sigma_2 - sigma_4) = -eps^2 m''(0).
    """
    return data.d_eps, -data.eps ** 2 * float(m.derivative(0.0, 2))


def coefficient_residual(alpha, data: SpectralSelectionData, table: Optional[np.ndarray] = None) -> np.ndarray:
    """
    gamma_k - alpha_k - sum_l alpha_l M[k, l] + alpha_k sum_l alpha_l m_l for k <= K:
    the right-hand side of the truncated coefficient dynamics, zero at a steady state.
    """
    K = data.truncation
    a = pad(alpha, K)
    gamma = reproduction_spectral(a, a, K, table)
    return gamma - a - data.matrix @ a + a * np.dot(a, data.coefficients)


def _kernel_width(q: GridDensity, eps: float) -> float:
    # Gamma_eps in trait coordinates is Gamma_1 in the rescaled frame
    return eps if q.frame == "q" else 1.0


def _check_boundary(q: GridDensity) -> None:
    peak = float(np.max(np.abs(q.values)))
    band = GRID_BOUNDARY_BAND
    edge = float(max(np.max(np.abs(q.values[:band])), np.max(np.abs(q.values[-band:]))))
    if edge > GRID_BOUNDARY_TOLERANCE * peak:
        raise DomainTooSmallError(
            f"density reaches {edge / peak:.2e} of its peak within {band} cells of the boundary "
            f"of [{q.origin:.4g}, {q.points[-1]:.4g}]: enlarge the grid")


def reproduction_grid(q: GridDensity, eps: float, method: str = GRID_CONVOLUTION_METHOD) -> GridDensity:
    """
    T_eps[q] on the grid of q in two stages: the parents' mean density
    psi(s) = 2 (q*q)(2s), then the segregation kernel Gamma_eps * psi.

    Parameters
    ----------
    q : GridDensity
        Input density, in either frame (the kernel width follows the frame).
    eps : float
        Segregation parameter.
    method : str
        "direct" (fixed-order summation) or "fft".

    Raises
    ------
    NumericError
        On non-finite input values.
    DomainTooSmallError
        If the input has significant mass next to the grid boundary.
    """
    if not np.all(np.isfinite(q.values)):
        raise NumericError("non-finite density values entering the reproduction operator")
    _check_boundary(q)

    try:
        convolve = fftconvolve if method == "fft" else np.convolve
        n, h = q.size, q.spacing

        # q*q sampled at z_j = 2 x_0 + j h, j = 0..2n-2
        self_convolution = h * convolve(q.values, q.values)
        z = 2.0 * q.origin + h * np.arange(2 * n - 1)
        psi = 2.0 * np.interp(2.0 * q.points, z, self_convolution)

        a = _kernel_width(q, eps)
        offsets = h * (np.arange(2 * n - 1) - (n - 1))
        kernel = np.exp(-(offsets / a) ** 2) / (np.sqrt(np.pi) * a)
        values = convolve(psi * q.trapezoid_weights, kernel)[n - 1:2 * n - 1]
        if method == "fft":
            values = np.maximum(values, 0.0)
        return q.with_values(values)
    except Exception as e:
        raise CustomException(e, sys) from e


def reproduction_central_moments(M: MomentVector, eps: float, k_max: int) -> MomentVector:
    """
    Central moments of T_eps[q] from those of a unit-mass q:

        M_k(out) = sum_{i even} binom(k, i) a^i s_i 2^{-(k-i)} sum_j binom(k-i, j) M_j M_{k-i-j}

    with s_i the moments of Gamma_1 and a the kernel width in the frame of M
    (eps in the q-frame, 1 in the N-frame). The mean is unchanged.

    Raises
    ------
    RangeError
        If k_max exceeds the stored order.
    """
    if k_max > M.k_max:
        raise RangeError(f"requested order {k_max} but only {M.k_max} central moments are stored")
    a = eps if M.frame == "q" else 1.0
    c = np.array(M.central[:k_max + 1], dtype= float)
    c[0], c[1] = 1.0, 0.0

    out = np.zeros(k_max + 1)
    for k in range(k_max + 1):
        total = 0.0
        for i in range(0, k + 1, 2):
            rest = k - i
            parents = sum(comb(rest, j, exact= True) * c[j] * c[rest - j] for j in range(rest + 1))
            total += comb(k, i, exact= True) * a ** i * scaled_gaussian_moment(i, max_order= max(i, 2)) * parents / 2.0 ** rest
        out[k] = total
    return MomentVector(frame= M.frame, eps= M.eps, m0= 1.0, m1= M.m1, central= out)
