import sys
import numpy as np
from typing import Optional, Tuple
from scipy.optimize import minimize_scalar, brentq

from src.logger import logging
from src.exception import (CustomException, DegenerateExtremumError, ModelDomainError,
                           InsufficientMetadataError, FitOverflowError)
from src.constants import (MODEL_SEARCH_SAMPLES, MODEL_REPORT_SAMPLES, MODEL_NORMAL_FORM_TOLERANCE,
                           MODEL_H5_DELTA, MODEL_H6_DELTA_PRIME, MODEL_H2_MAX_EXPONENT, GRID_MASS_TOLERANCE)
from src.entity.selection import SelectionFunction
from src.entity.artifact_entity import (RawModel, NondimModel, GridDensity, AdmissibilityResult,
                                        OmegaEtaMass, AssumptionCheck, AssumptionReport)


def nondimensionalize(raw: RawModel) -> NondimModel:
    """
    Rescale a raw model around its extremum x0.

    With s = sqrt(r/|m''(x0)|): eps = alpha/s, m~(y) = (m(s y + x0) - m(x0))/r,
    r~ = 1 - m(x0)/r, time measured in units of 1/r.

    Raises
    ------
    ModelDomainError
        If r, kappa or alpha is not positive, or x0 is not a critical point.
    DegenerateExtremumError
        If m''(x0) = 0.
    """
    for name in ("r", "kappa", "alpha"):
        value = getattr(raw, name)
        if not value > 0:
            raise ModelDomainError(f"{name} must be positive, got {value}")

    m = raw.selection
    curvature = float(m.derivative(raw.x0, 2))
    if abs(curvature) < MODEL_NORMAL_FORM_TOLERANCE:
        raise DegenerateExtremumError(f"m''({raw.x0}) = {curvature:.3e} vanishes: no concentration scale")

    scale = np.sqrt(raw.r / abs(curvature))
    m_x0 = float(m(raw.x0))
    normalized = m.rescaled(scale= scale, shift= raw.x0, factor= 1.0 / raw.r, offset= m_x0)
    normalized.normalized = True

    value, slope, second = float(normalized(0.0)), float(normalized.derivative(0.0, 1)), float(normalized.derivative(0.0, 2))
    if abs(slope) > MODEL_NORMAL_FORM_TOLERANCE:
        raise ModelDomainError(f"x0 = {raw.x0} is not a critical point of {m.name}: rescaled slope {slope:.3e}")
    if abs(value) > MODEL_NORMAL_FORM_TOLERANCE or abs(abs(second) - 1.0) > MODEL_NORMAL_FORM_TOLERANCE:
        raise ModelDomainError(f"normal form not reached: m~(0) = {value:.3e}, m~''(0) = {second:.3e}")

    model = NondimModel(
        eps= float(raw.alpha / scale),
        selection= normalized,
        r_tilde= 1.0 - m_x0 / raw.r,
        trait_scale= float(scale),
        time_scale= 1.0 / raw.r,
        kappa= 1.0,
        x0= float(raw.x0),
        r= float(raw.r),
        raw_kappa= float(raw.kappa),
    )
    logging.info(f"nondimensionalized {m.name}: eps={model.eps:.6g}, r~={model.r_tilde:.6g}, s={scale:.6g}")
    return model


def redimensionalize(model: NondimModel, q: GridDensity, rho: float) -> Tuple[GridDensity, float]:
    """
    Map a nondimensional q-frame density and mass back to raw coordinates:
    q_raw(x) = q~((x - x0)/s)/s and rho_raw = rho~ r/kappa.
    """
    q = q.to_frame("q")
    s = model.trait_scale
    raw = GridDensity(origin= s * q.origin + model.x0, spacing= s * q.spacing, values= q.values / s, frame= "q", eps= q.eps)
    return raw, rho * model.r / model.raw_kappa


def find_global_minimum(m: SelectionFunction, samples: int = MODEL_SEARCH_SAMPLES) -> Tuple[float, float]:
    """
    Global minimum (value, location) of m: the declared one when known, else
    coarse sampling on the search interval refined by golden-section search.

    Raises
    ------
    InsufficientMetadataError
        If there is neither a declared minimum nor a usable search interval.
    """
    if m.global_minimum is not None:
        return float(m.global_minimum[0]), float(m.global_minimum[1])
    if m.search_interval is None or len(m.search_interval) != 2 or not m.search_interval[0] < m.search_interval[1]:
        raise InsufficientMetadataError(f"{m.name}: no global minimum declared and no search interval")

    try:
        x = np.linspace(m.search_interval[0], m.search_interval[1], samples)
        values = m(x)
        i = int(np.argmin(values))
        if i in (0, samples - 1):
            logging.warning(f"{m.name}: sampled minimum sits on the search interval boundary x={x[i]:.4g}")
            return float(values[i]), float(x[i])

        result = minimize_scalar(lambda t: float(m(t)), bracket= (x[i - 1], x[i], x[i + 1]), method= "golden")
        if result.fun <= values[i]:
            return float(result.fun), float(result.x)
        return float(values[i]), float(x[i])
    except Exception as e:
        raise CustomException(e, sys) from e


def check_admissibility(m: SelectionFunction, x_m: float = 0.0) -> AdmissibilityResult:
    """margin = m_- + 1 - m(x_m); the extremum is admissible iff margin > 0."""
    m_minus, location = find_global_minimum(m)
    value = float(m(x_m))
    margin = m_minus + 1.0 - value
    return AdmissibilityResult(admissible= margin > 0.0, margin= margin, m_minus= m_minus,
                               minimum_location= location, value_at_extremum= value)


def _trait_points(q: GridDensity) -> np.ndarray:
    # m acts on trait coordinates; N-frame points are scaled back by eps
    return q.points * (q.eps if q.frame == "N" else 1.0)


def omega_eta_mass(q: GridDensity, m: SelectionFunction, eta: float) -> OmegaEtaMass:
    """
    Mass of q on Omega_eta = {m <= m_- + 1 + eta} and the lower bound
    eta/(1+eta) any steady state must satisfy there.
    """
    if not eta > 0:
        raise ModelDomainError(f"eta must be positive, got {eta}")
    if abs(q.mass - 1.0) > GRID_MASS_TOLERANCE:
        logging.warning(f"omega_eta_mass on a density of mass {q.mass:.8f}")

    m_minus, _ = find_global_minimum(m)
    inside = m(_trait_points(q)) <= m_minus + 1.0 + eta
    mass = float(q.spacing * np.sum(q.values[inside]))
    result = OmegaEtaMass(eta= eta, mass_in_omega= mass, bound= eta / (1.0 + eta))
    if not result.satisfied:
        logging.warning(f"mass {mass:.6f} in Omega_eta below the bound {result.bound:.6f} (eta={eta}): not a steady state")
    return result


def _level_crossing(m: SelectionFunction, x: np.ndarray, level: float, direction: int) -> float:
    """First point moving from 0 in `direction` where m exceeds `level` (bisection), inf if none in x."""
    side = x[x > 0] if direction > 0 else x[x < 0][::-1]
    above = np.nonzero(m(side) > level)[0]
    if above.size == 0:
        return direction * np.inf
    j = int(above[0])
    inner = 0.0 if j == 0 else side[j - 1]
    a, b = sorted((float(inner), float(side[j])))
    return float(brentq(lambda t: float(m(t)) - level, a, b))


def _check_h1(m: SelectionFunction) -> AssumptionCheck:
    value, slope, second = float(m(0.0)), float(m.derivative(0.0, 1)), float(m.derivative(0.0, 2))
    normal = abs(value) < MODEL_NORMAL_FORM_TOLERANCE and abs(slope) < MODEL_NORMAL_FORM_TOLERANCE \
        and abs(abs(second) - 1.0) < MODEL_NORMAL_FORM_TOLERANCE
    admissibility = check_admissibility(m, 0.0)
    return AssumptionCheck(
        name= "H1",
        status= "pass" if normal and admissibility.admissible else "fail",
        witnesses= {"margin": admissibility.margin, "m_minus": admissibility.m_minus, "m0": value, "dm0": slope, "d2m0": second},
        note= "" if normal else "m is not in normal form at 0",
    )


def _growth_fit(values: np.ndarray, x: np.ndarray) -> Optional[Tuple[float, int]]:
    """Smallest p with an interior worst point of values/(1 + |x|^p), and that worst ratio."""
    edge = 0.05 * (x[-1] - x[0])
    for p in range(1, MODEL_H2_MAX_EXPONENT + 1):
        ratio = values / (1.0 + np.abs(x) ** p)
        i = int(np.argmax(ratio))
        # a worst point at the window edge says nothing about the tails
        if x[i] - x[0] > edge and x[-1] - x[i] > edge or ratio[i] == 0.0:
            return float(ratio[i]), p
    return None


def _check_h2(m: SelectionFunction, x: np.ndarray) -> Tuple[AssumptionCheck, AssumptionCheck]:
    checks = []
    for name, order in (("H2", 3), ("H2'", 2)):
        fit = _growth_fit(np.abs(m.derivative(x, order)), x)
        if fit is None:
            note = f"growth of the derivative of order {order} not bounded by degree {MODEL_H2_MAX_EXPONENT} inside the sample window"
            checks.append(AssumptionCheck(name, "unchecked", {}, note))
        else:
            checks.append(AssumptionCheck(name, "pass", {"A_m": fit[0], "p": float(fit[1])}))
    return checks[0], checks[1]


def _check_h3(m: SelectionFunction, x: np.ndarray) -> AssumptionCheck:
    values = m(x)
    slope = m.derivative(x, 1)
    crossings = np.nonzero(np.sign(slope[:-1]) * np.sign(slope[1:]) < 0)[0]
    extrema = [float(values[i]) for i in crossings if abs(x[i]) > (x[1] - x[0]) * 2]
    minimum_extremum = min(extrema) if extrema else np.inf
    nonnegative = float(values.min()) >= -MODEL_NORMAL_FORM_TOLERANCE
    witnesses = {"min_m": float(values.min()), "min_other_extremum": float(minimum_extremum) if extrema else float("inf")}
    return AssumptionCheck("H3", "pass" if nonnegative and minimum_extremum > 1.0 else "fail", witnesses)


def _check_h4(m: SelectionFunction, x: np.ndarray) -> AssumptionCheck:
    second = m.derivative(x, 2)
    big_c = float(np.max(np.abs(second)))
    curvature_ok = abs(float(m.derivative(0.0, 2)) - 1.0) < MODEL_NORMAL_FORM_TOLERANCE
    x_minus, x_plus = _level_crossing(m, x, 1.0, -1), _level_crossing(m, x, 1.0, +1)

    inner = x[(x > x_minus) & (x < x_plus) & (x != 0.0)]
    slope = m.derivative(inner, 1)
    left, right = slope[inner < 0], slope[inner > 0]
    monotone = bool(np.all(left < 0) and np.all(right > 0))

    away = x[np.abs(x) > (x[1] - x[0])]
    small_c = float(np.min(m(away) / away ** 2))

    witnesses = {"C_m": big_c, "c_m": small_c, "x_minus": x_minus, "x_plus": x_plus}
    status = "pass" if curvature_ok and monotone and small_c > 0.0 else "fail"
    note = f"no sign change of m' detected at resolution h={x[1] - x[0]:.2e}" if monotone else "m' changes sign inside (x_-, x_+)"
    return AssumptionCheck("H4", status, witnesses, note)


def assumption_report(m: SelectionFunction,
                      eps: float,
                      q: Optional[GridDensity] = None,
                      delta: float = MODEL_H5_DELTA,
                      delta_prime: float = MODEL_H6_DELTA_PRIME,
                      interval: Optional[Tuple[float, float]] = None,
                      samples: int = MODEL_REPORT_SAMPLES) -> AssumptionReport:
    """
    Sampled check of the structural assumptions on m, plus the two assumptions
    on a steady density q when one is supplied.

    Every item carries its measured witnesses. Properties that a finite sample
    cannot decide (tails beyond the window, H5/H6 without q) are "unchecked".
    """
    logging.info(f"building assumption report for {m.name} at eps={eps}")
    lo, hi = interval or m.search_interval
    x = np.linspace(lo, hi, samples)

    report = AssumptionReport(selection_name= m.name, eps= eps)
    report.checks.append(_check_h1(m))
    report.checks.extend(_check_h2(m, x))
    report.checks.append(_check_h3(m, x))
    report.checks.append(_check_h4(m, x))

    if q is None:
        report.checks.append(AssumptionCheck("H5", "unchecked", {}, "no density supplied"))
        report.checks.append(AssumptionCheck("H6", "unchecked", {}, "no density supplied"))
        return report

    # local import: diagnostics depends on the operators, not on the model
    from src.components.diagnostics import tail_exponential_moment
    density = q.to_frame("q")
    selection_average = float(density.spacing * np.sum(m(density.points) * density.values))
    report.checks.append(AssumptionCheck("H5", "pass" if selection_average < 1.0 - delta else "fail",
                                         {"int_mq": selection_average, "delta": delta}))
    try:
        a1 = tail_exponential_moment(density, eps, delta_prime)
        report.checks.append(AssumptionCheck("H6", "pass", {"A_1": a1, "delta_prime": delta_prime}))
    except FitOverflowError as e:
        report.checks.append(AssumptionCheck("H6", "fail", {"delta_prime": delta_prime}, e.raw_message))
    return report
