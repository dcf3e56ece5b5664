import sys
import numpy as np
from functools import lru_cache
from typing import Callable
from scipy.special import roots_hermitenorm, gammaln

from src.logger import logging
from src.exception import CustomException, RangeError, NumericError
from src.constants import HERMITE_DEFAULT_TRUNCATION, HERMITE_QUADRATURE_ORDER, HERMITE_WEIGHT_MASS_TOLERANCE


class HermiteBasis:
    """
    Orthonormal probabilists' Hermite polynomials H_0..H_K for the weight
    G(x) = exp(-x^2/2)/sqrt(2 pi).

    H_0 = 1, H_1 = x and sqrt(k+1) H_{k+1} = x H_k - sqrt(k) H_{k-1}. Factorial
    ratios are kept in log space (`log_factorial`) so nothing overflows for
    large K.
    """

    def __init__(self, max_degree: int = HERMITE_DEFAULT_TRUNCATION):
        if max_degree < 0:
            raise RangeError(f"max_degree must be nonnegative, got {max_degree}")
        self.max_degree = int(max_degree)
        self.sqrt_index = np.sqrt(np.arange(self.max_degree + 2, dtype= float))
        self.log_factorial = gammaln(np.arange(2 * self.max_degree + 2, dtype= float) + 1.0)
        self.moments = gaussian_moment_table(2 * self.max_degree)

    def eval(self, k: int, x) -> np.ndarray:
        if k < 0 or k > self.max_degree:
            raise RangeError(f"degree {k} outside basis range 0..{self.max_degree}")
        return hermite_eval(k, x)

    def table(self, x) -> np.ndarray:
        """Values H_k(x_i) as an array of shape (K+1, len(x))."""
        return hermite_table(self.max_degree, x)


class QuadratureRule:
    """
    Gauss-Hermite rule normalized to the probabilists' Gaussian G, so that the
    weights sum to one and polynomials of degree <= 2n-1 are integrated exactly.
    """

    def __init__(self, order: int = HERMITE_QUADRATURE_ORDER):
        try:
            nodes, weights = roots_hermitenorm(order)
            weights = weights / np.sqrt(2.0 * np.pi)
            mass_error = abs(weights.sum() - 1.0)
            if mass_error > HERMITE_WEIGHT_MASS_TOLERANCE:
                logging.warning(f"quadrature weights of order {order} sum to 1 - {mass_error:.2e}")

            self.order = int(order)
            self.nodes = nodes
            self.weights = weights
            self.exactness = 2 * self.order - 1
        except Exception as e:
            raise CustomException(e, sys) from e

    def integrate(self, values) -> float:
        return float(np.dot(self.weights, values))


@lru_cache(maxsize= 8)
def _cached_rule(order: int) -> QuadratureRule:
    return QuadratureRule(order)


def quadrature_rule(order: int = HERMITE_QUADRATURE_ORDER) -> QuadratureRule:
    """Shared, cached quadrature rule of the given order."""
    return _cached_rule(int(order))


def gaussian_moment_table(max_order: int) -> np.ndarray:
    # sigma_k = (k - 1) sigma_{k-2}, exact integers in double precision far beyond k = 64
    table = np.zeros(max_order + 1)
    table[0] = 1.0
    for k in range(2, max_order + 1, 2):
        table[k] = (k - 1) * table[k - 2]
    return table


def gaussian_moment(k: int, max_order: int = 2 * HERMITE_DEFAULT_TRUNCATION) -> float:
    """
    k-th moment sigma_k of G: 0 for odd k, k!/(2^{k/2} (k/2)!) for even k.

    Raises
    ------
    RangeError
        If k is negative or beyond `max_order`.
    """
    if k < 0 or k > max_order:
        raise RangeError(f"gaussian moment of order {k} outside table range 0..{max_order}")
    return float(gaussian_moment_table(k)[k])


def scaled_gaussian_moment(k: int, max_order: int = 2 * HERMITE_DEFAULT_TRUNCATION) -> float:
    """k-th moment of Gamma_1, i.e. sigma_k / 2^{k/2}."""
    return gaussian_moment(k, max_order) / 2.0 ** (k / 2.0)


def hermite_eval(k: int, x) -> np.ndarray:
    """Value of H_k at x by the upward recurrence."""
    if k < 0:
        raise RangeError(f"negative Hermite degree {k}")
    x = np.asarray(x, dtype= float)
    previous, current = np.zeros_like(x), np.ones_like(x)
    for j in range(k):
        previous, current = current, (x * current - np.sqrt(j) * previous) / np.sqrt(j + 1.0)
    return current


def hermite_table(max_degree: int, x) -> np.ndarray:
    x = np.atleast_1d(np.asarray(x, dtype= float))
    table = np.empty((max_degree + 1, x.size))
    table[0] = 1.0
    if max_degree >= 1:
        table[1] = x
    for j in range(1, max_degree):
        table[j + 1] = (x * table[j] - np.sqrt(j) * table[j - 1]) / np.sqrt(j + 1.0)
    return table


def project(f: Callable, rule: QuadratureRule, K: int) -> np.ndarray:
    """
    Hermite coefficients alpha_k = sum_i w_i f(x_i) H_k(x_i), k = 0..K.

    Raises
    ------
    NumericError
        If f is not finite at a quadrature node.
    """
    values = np.asarray(f(rule.nodes), dtype= float)
    if not np.all(np.isfinite(values)):
        raise NumericError(f"non-finite samples at {np.count_nonzero(~np.isfinite(values))} quadrature nodes")
    return hermite_table(K, rule.nodes) @ (rule.weights * values)


def synthesize(alpha, x) -> np.ndarray:
    """Evaluate sum_k alpha_k H_k(x) by Clenshaw backward summation."""
    alpha = np.asarray(alpha, dtype= float)
    x = np.asarray(x, dtype= float)
    b1, b2 = np.zeros_like(x), np.zeros_like(x)
    for k in range(alpha.size - 1, -1, -1):
        b1, b2 = alpha[k] + x / np.sqrt(k + 1.0) * b1 - np.sqrt((k + 1.0) / (k + 2.0)) * b2, b1
    return b1


def weighted_l2_norm(alpha) -> float:
    """L^2(G) norm of sum_k alpha_k H_k, i.e. the l^2 norm of alpha (Parseval)."""
    return float(np.linalg.norm(np.asarray(alpha, dtype= float)))


def pad(alpha, K: int) -> np.ndarray:
    """Dense length-(K+1) copy of alpha, zero-padded or truncated."""
    alpha = np.asarray(alpha, dtype= float)
    out = np.zeros(K + 1)
    n = min(alpha.size, K + 1)
    out[:n] = alpha[:n]
    return out
