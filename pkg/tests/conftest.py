import numpy as np
import pytest

from src.components.hermite_core import HermiteBasis, quadrature_rule
from src.components.operators import selection_data
from src.components.steady_solver import steady_fixed_point
from src.entity.config_entity import GridConfig, SteadyProblem
from src.entity.selection import quadratic_selection, even_quartic_selection, perturbed_quadratic_selection

TRUNCATION = 32
QUADRATURE_ORDER = 128


@pytest.fixture(scope= "session")
def basis():
    return HermiteBasis(TRUNCATION)


@pytest.fixture(scope= "session")
def rule():
    return quadrature_rule(QUADRATURE_ORDER)


@pytest.fixture(scope= "session")
def small_grid():
    return GridConfig(half_width= 12.0, points= 512)


@pytest.fixture(scope= "session")
def fine_grid():
    return GridConfig(half_width= 12.0, points= 2048)


@pytest.fixture(scope= "session")
def quadratic():
    return quadratic_selection()


@pytest.fixture(scope= "session")
def even_quartic():
    return even_quartic_selection()


@pytest.fixture(scope= "session")
def perturbed():
    return perturbed_quadratic_selection()


def spectral_data(m, eps, K= TRUNCATION):
    return selection_data(m, eps, HermiteBasis(K), quadrature_rule(QUADRATURE_ORDER))


def solve_steady(m, eps, K= TRUNCATION, tolerance= 1e-12):
    data = spectral_data(m, eps, K)
    return steady_fixed_point(SteadyProblem(data= data, truncation= K, tolerance= tolerance, max_iterations= 200))


@pytest.fixture(scope= "session")
def quadratic_data(quadratic):
    return spectral_data(quadratic, 0.1)


@pytest.fixture(scope= "session")
def quadratic_steady(quadratic):
    return solve_steady(quadratic, 0.1)


@pytest.fixture
def rng():
    return np.random.default_rng(7)
