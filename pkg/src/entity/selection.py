import sys
import numpy as np
import pandas as pd
from typing import Callable, Optional, Tuple
from numpy.polynomial import Polynomial
from scipy.interpolate import CubicSpline

from src.logger import logging
from src.exception import CustomException, ConfigError
from src.constants import MODEL_SEARCH_INTERVAL, MODEL_DIFFERENCE_STEP

ArrayFunction = Callable[[np.ndarray], np.ndarray]


def _central_difference(function: ArrayFunction, step: float) -> ArrayFunction:
    def derivative(x):
        x = np.asarray(x, dtype= float)
        return (function(x + step) - function(x - step)) / (2.0 * step)
    return derivative


class SelectionFunction:
    """
    A trait-dependent mortality rate m together with derivative access and the
    metadata the assumption checkers need.

    Derivatives that are not supplied analytically are obtained by central
    differences of the next lower derivative, so m'' and m''' stay usable for
    tabulated or user-defined rates.
    """

    def __init__(self,
                 name: str,
                 value: ArrayFunction,
                 first: Optional[ArrayFunction] = None,
                 second: Optional[ArrayFunction] = None,
                 third: Optional[ArrayFunction] = None,
                 extremum: float = 0.0,
                 growth: Optional[Tuple[int, float]] = None,
                 global_minimum: Optional[Tuple[float, float]] = None,
                 search_interval: Tuple[float, float] = MODEL_SEARCH_INTERVAL,
                 normalized: bool = False,
                 even: bool = False,
                 params: Optional[dict] = None):
        """
        Args:
            name (str): library name, reported in tables.
            value (callable): vectorized evaluator of m.
            first, second, third (callable, optional): analytic m', m'', m'''.
            extremum (float): the extremum x_0 around which concentration is studied.
            growth (tuple, optional): declared (p, A_m) of the polynomial growth bound on m'''.
            global_minimum (tuple, optional): known (m_-, location) of the global minimum.
            search_interval (tuple): interval for sampled searches when no analytic data exists.
            normalized (bool): True when m(0)=0, m'(0)=0, |m''(0)|=1 hold by construction.
            even (bool): True when m(-x) = m(x).
            params (dict, optional): the parameters the function was built from.
        """
        self.name = name
        self._value = value
        step = MODEL_DIFFERENCE_STEP
        self._first = first if first is not None else _central_difference(value, step)
        self._second = second if second is not None else _central_difference(self._first, step)
        self._third = third if third is not None else _central_difference(self._second, step)
        self.extremum = float(extremum)
        self.growth = growth
        self.global_minimum = global_minimum
        self.search_interval = tuple(search_interval)
        self.normalized = normalized
        self.even = even
        self.params = dict(params or {})

    def __call__(self, x):
        return self._value(np.asarray(x, dtype= float))

    def derivative(self, x, order: int = 1):
        x = np.asarray(x, dtype= float)
        if order == 0:
            return self._value(x)
        if order == 1:
            return self._first(x)
        if order == 2:
            return self._second(x)
        if order == 3:
            return self._third(x)
        raise ValueError(f"derivative order {order} is not available")

    def curvature_sign(self) -> int:
        """Sign of m'' at the declared extremum (+1 minimum, -1 maximum, 0 degenerate)."""
        return int(np.sign(float(self.derivative(self.extremum, 2))))

    def rescaled(self, scale: float, shift: float, factor: float, offset: float, name: Optional[str] = None) -> "SelectionFunction":
        """
        Return y -> factor * (m(scale*y + shift) - offset) with chain-rule derivatives.
        """
        value, first, second, third = self._value, self._first, self._second, self._third
        global_minimum = None
        if self.global_minimum is not None:
            m_minus, location = self.global_minimum
            global_minimum = (factor * (m_minus - offset), (location - shift) / scale)
        lo, hi = self.search_interval
        return SelectionFunction(
            name= name or self.name,
            value= lambda y: factor * (value(scale * y + shift) - offset),
            first= lambda y: factor * scale * first(scale * y + shift),
            second= lambda y: factor * scale ** 2 * second(scale * y + shift),
            third= lambda y: factor * scale ** 3 * third(scale * y + shift),
            extremum= (self.extremum - shift) / scale,
            growth= self.growth,
            global_minimum= global_minimum,
            search_interval= ((lo - shift) / scale, (hi - shift) / scale),
            normalized= False,
            even= self.even and shift == 0.0,
            params= dict(self.params, scale= scale, shift= shift, factor= factor, offset= offset),
        )

    def shifted(self, constant: float) -> "SelectionFunction":
        """Return m + constant (derivatives unchanged)."""
        value = self._value
        global_minimum = None
        if self.global_minimum is not None:
            global_minimum = (self.global_minimum[0] + constant, self.global_minimum[1])
        return SelectionFunction(
            name= f"{self.name}+{constant:g}",
            value= lambda x: value(x) + constant,
            first= self._first,
            second= self._second,
            third= self._third,
            extremum= self.extremum,
            growth= self.growth,
            global_minimum= global_minimum,
            search_interval= self.search_interval,
            normalized= False,
            even= self.even,
            params= dict(self.params, constant= constant),
        )

    def __repr__(self):
        return f"SelectionFunction(name={self.name!r}, params={self.params})"


def zero_selection() -> SelectionFunction:
    return SelectionFunction(
        name= "zero",
        value= lambda x: np.zeros_like(x),
        first= lambda x: np.zeros_like(x),
        second= lambda x: np.zeros_like(x),
        third= lambda x: np.zeros_like(x),
        growth= (1, 0.0),
        global_minimum= (0.0, 0.0),
        even= True,
    )


def quadratic_selection() -> SelectionFunction:
    """The stable canonical rate x^2/2."""
    return SelectionFunction(
        name= "quadratic",
        value= lambda x: 0.5 * x ** 2,
        first= lambda x: x,
        second= lambda x: np.ones_like(x),
        third= lambda x: np.zeros_like(x),
        growth= (1, 1.0),
        global_minimum= (0.0, 0.0),
        normalized= True,
        even= True,
    )


def double_well_selection(depth: float = 1.5, name: str = "double_well") -> SelectionFunction:
    """
    -x^2/2 + a x^4 with a = 1/(16 depth): local maximum 0 at the origin and two
    global minima of value -depth at +-sqrt(4 depth). The central maximum is
    admissible exactly when depth < 1.
    """
    if depth <= 0:
        raise ConfigError(f"double well depth must be positive, got {depth}")
    a = 1.0 / (16.0 * depth)
    return SelectionFunction(
        name= name,
        value= lambda x: -0.5 * x ** 2 + a * x ** 4,
        first= lambda x: -x + 4.0 * a * x ** 3,
        second= lambda x: -1.0 + 12.0 * a * x ** 2,
        third= lambda x: 24.0 * a * x,
        growth= (1, 24.0 * a),
        global_minimum= (-depth, float(np.sqrt(4.0 * depth))),
        normalized= True,
        even= True,
        params= {"depth": depth},
    )


def even_quartic_selection() -> SelectionFunction:
    """-x^2/2 + x^4/4, an admissible even local maximum (margin 3/4)."""
    return double_well_selection(depth= 0.25, name= "even_quartic")


def perturbed_quadratic_selection(amplitude: float = 0.1) -> SelectionFunction:
    """x^2/2 + amplitude * x^3/(1+x^2): a non-even stable rate with alpha_1 != 0."""
    return SelectionFunction(
        name= "perturbed_quadratic",
        value= lambda x: 0.5 * x ** 2 + amplitude * x ** 3 / (1.0 + x ** 2),
        first= lambda x: x + amplitude * (x ** 4 + 3.0 * x ** 2) / (1.0 + x ** 2) ** 2,
        second= lambda x: 1.0 + amplitude * (6.0 * x - 2.0 * x ** 3) / (1.0 + x ** 2) ** 3,
        growth= (1, 1.0),
        normalized= True,
        params= {"amplitude": amplitude},
    )


def polynomial_selection(coefficients, extremum: float = 0.0, name: str = "polynomial") -> SelectionFunction:
    """Polynomial rate sum c_i x^i with exact derivatives."""
    p = Polynomial(np.asarray(coefficients, dtype= float))
    d1, d2, d3 = p.deriv(1), p.deriv(2), p.deriv(3)
    degree = max(p.degree(), 3)
    even = bool(np.allclose(p.coef[1::2], 0.0))
    return SelectionFunction(
        name= name,
        value= lambda x: p(x),
        first= lambda x: d1(x),
        second= lambda x: d2(x),
        third= lambda x: d3(x),
        extremum= extremum,
        growth= (max(degree - 3, 1), float(np.max(np.abs(d3.coef))) if d3.coef.size else 0.0),
        even= even and extremum == 0.0,
        params= {"coefficients": [float(c) for c in p.coef]},
    )


def shifted_quadratic_selection(curvature: float = 1.0, center: float = 0.0, offset: float = 0.0) -> SelectionFunction:
    """offset + curvature/2 (x - center)^2, a raw (not normalized) stable rate."""
    return SelectionFunction(
        name= "shifted_quadratic",
        value= lambda x: offset + 0.5 * curvature * (x - center) ** 2,
        first= lambda x: curvature * (x - center),
        second= lambda x: curvature * np.ones_like(x),
        third= lambda x: np.zeros_like(x),
        extremum= center,
        growth= (1, 1.0),
        global_minimum= (offset, center) if curvature > 0 else None,
        params= {"curvature": curvature, "center": center, "offset": offset},
    )


def tabulated_selection(x, values, extremum: float = 0.0, name: str = "tabulated") -> SelectionFunction:
    """Cubic-spline rate through tabulated samples."""
    spline = CubicSpline(np.asarray(x, dtype= float), np.asarray(values, dtype= float))
    return SelectionFunction(
        name= name,
        value= lambda y: spline(y),
        first= lambda y: spline(y, 1),
        second= lambda y: spline(y, 2),
        third= lambda y: spline(y, 3),
        extremum= extremum,
        search_interval= (float(np.min(x)), float(np.max(x))),
        params= {"samples": int(len(x))},
    )


BUILTIN_SELECTIONS = {
    "zero": zero_selection,
    "quadratic": quadratic_selection,
    "even_quartic": even_quartic_selection,
    "double_well": double_well_selection,
    "perturbed_quadratic": perturbed_quadratic_selection,
    "polynomial": polynomial_selection,
    "shifted_quadratic": shifted_quadratic_selection,
}


def build_selection(spec, library: Optional[dict] = None) -> SelectionFunction:
    """
    Build a SelectionFunction from a config entry.

    `spec` is either a library key (str) or a mapping with a `name` and the
    builder's keyword parameters. Named entries of `library` (the merged
    `selections:` section of the config) are resolved first; the `tabulated`
    family reads a two-column (x, m) CSV given by `path`.
    """
    try:
        library = library or {}
        if isinstance(spec, str):
            spec = library.get(spec, {"name": spec})
        if not isinstance(spec, dict) or "name" not in spec:
            raise ConfigError(f"selection spec must name a function, got {spec!r}")

        params = {k: v for k, v in spec.items() if k != "name"}
        name = spec["name"]
        if name in library and library[name] is not spec:
            return build_selection(dict(library[name], **params), library= None)

        if name == "tabulated":
            if "path" not in params:
                raise ConfigError("tabulated selection requires a 'path' to a CSV file with columns x, m")
            samples = pd.read_csv(params["path"])
            logging.info(f"loaded {len(samples)} tabulated selection samples from {params['path']}")
            return tabulated_selection(samples["x"].to_numpy(), samples["m"].to_numpy(), extremum= float(params.get("extremum", 0.0)))

        if name not in BUILTIN_SELECTIONS:
            raise ConfigError(f"unknown selection function '{name}'")
        return BUILTIN_SELECTIONS[name](**params)
    except CustomException:
        raise
    except TypeError as e:
        raise ConfigError(f"bad parameters for selection {spec!r}: {e}") from e
    except Exception as e:
        raise CustomException(e, sys) from e
