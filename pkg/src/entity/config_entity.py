import os
from dataclasses import dataclass, field, asdict
from typing import List, Optional, Tuple, Union

from src.constants import *
from src.exception import ConfigError


def _positive(name: str, value, integer: bool = False):
    try:
        value = int(value) if integer else float(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{name} must be a {'integer' if integer else 'number'}, got {value!r}")
    if value <= 0:
        raise ConfigError(f"{name} must be positive, got {value}")
    return value


def _section(raw: dict, name: str) -> dict:
    section = raw.get(name) or {}
    if not isinstance(section, dict):
        raise ConfigError(f"'{name}' must be a mapping")
    return section


@dataclass
class GridConfig:
    """Uniform grid geometry; half_width is measured in the N-frame."""
    half_width: float = GRID_HALF_WIDTH
    points: int = GRID_POINTS
    convolution: str = GRID_CONVOLUTION_METHOD

    def __post_init__(self):
        self.half_width = _positive("grid.half_width", self.half_width)
        self.points = _positive("grid.points", self.points, integer= True)
        if self.points < 8:
            raise ConfigError(f"grid.points must be at least 8, got {self.points}")
        if self.convolution not in ("direct", "fft"):
            raise ConfigError(f"grid.convolution must be 'direct' or 'fft', got {self.convolution!r}")


@dataclass
class ModelConfig:
    eps: float
    truncation: int = HERMITE_DEFAULT_TRUNCATION
    quadrature_order: int = HERMITE_QUADRATURE_ORDER
    grid: GridConfig = field(default_factory= GridConfig)
    r_tilde: float = STEADY_R_TILDE
    kappa: float = STEADY_KAPPA

    def __post_init__(self):
        self.eps = _positive("eps", self.eps)
        self.truncation = _positive("model.truncation", self.truncation, integer= True)
        self.quadrature_order = _positive("model.quadrature_order", self.quadrature_order, integer= True)
        self.kappa = _positive("model.kappa", self.kappa)
        if self.truncation < 4:
            raise ConfigError(f"model.truncation must be at least 4, got {self.truncation}")
        if self.quadrature_order < self.truncation + 1:
            raise ConfigError("model.quadrature_order must exceed the truncation")


@dataclass
class SteadyConfig:
    spectral_tolerance: float = STEADY_SPECTRAL_TOLERANCE
    grid_tolerance: float = STEADY_GRID_TOLERANCE
    max_iterations: int = STEADY_MAX_ITERATIONS
    grid_max_iterations: int = STEADY_GRID_MAX_ITERATIONS
    spectral_damping: float = STEADY_SPECTRAL_DAMPING
    grid_damping: float = STEADY_GRID_DAMPING
    neighborhood_constant: float = STEADY_NEIGHBORHOOD_CONSTANT
    grid_oracle: bool = True

    def __post_init__(self):
        self.spectral_tolerance = _positive("steady.spectral_tolerance", self.spectral_tolerance)
        self.grid_tolerance = _positive("steady.grid_tolerance", self.grid_tolerance)
        self.max_iterations = _positive("steady.max_iterations", self.max_iterations, integer= True)
        self.grid_max_iterations = _positive("steady.grid_max_iterations", self.grid_max_iterations, integer= True)
        self.neighborhood_constant = _positive("steady.neighborhood_constant", self.neighborhood_constant)
        for name in ("spectral_damping", "grid_damping"):
            value = float(getattr(self, name))
            if not 0.0 < value <= 1.0:
                raise ConfigError(f"steady.{name} must lie in (0, 1], got {value}")
            setattr(self, name, value)


@dataclass
class SteadyProblem:
    """
    One spectral steady solve: selection data at a fixed epsilon plus the
    iteration controls. `data` is a SpectralSelectionData.
    """
    data: object
    truncation: int
    tolerance: float = STEADY_SPECTRAL_TOLERANCE
    max_iterations: int = STEADY_MAX_ITERATIONS
    neighborhood_constant: float = STEADY_NEIGHBORHOOD_CONSTANT
    damping: float = STEADY_SPECTRAL_DAMPING

    def __post_init__(self):
        if self.tolerance <= 0:
            raise ConfigError(f"steady tolerance must be positive, got {self.tolerance}")
        if self.truncation < 4:
            raise ConfigError(f"steady truncation must be at least 4, got {self.truncation}")


@dataclass
class DynamicsConfig:
    horizon: float = 20.0
    horizon_units: str = "fast"
    max_step: float = DYNAMICS_MAX_STEP
    growth_step_constant: float = DYNAMICS_GROWTH_STEP_CONSTANT
    blow_up_guard: float = DYNAMICS_BLOW_UP_GUARD
    snapshot_stride: int = DYNAMICS_SNAPSHOT_STRIDE
    fit_window: Tuple[float, float] = DYNAMICS_FIT_WINDOW
    grid_oracle: bool = False
    write_trajectories: bool = True

    def __post_init__(self):
        self.horizon = _positive("dynamics.horizon", self.horizon)
        self.max_step = _positive("dynamics.max_step", self.max_step)
        self.growth_step_constant = _positive("dynamics.growth_step_constant", self.growth_step_constant)
        self.blow_up_guard = _positive("dynamics.blow_up_guard", self.blow_up_guard)
        self.snapshot_stride = _positive("dynamics.snapshot_stride", self.snapshot_stride, integer= True)
        if self.horizon_units not in ("fast", "slow"):
            raise ConfigError(f"dynamics.horizon_units must be 'fast' or 'slow', got {self.horizon_units!r}")
        lo, hi = (float(v) for v in self.fit_window)
        if not 0.0 <= lo < hi <= 1.0:
            raise ConfigError(f"dynamics.fit_window must satisfy 0 <= lo < hi <= 1, got {self.fit_window}")
        self.fit_window = (lo, hi)

    def horizon_for(self, eps: float) -> float:
        """Integration horizon in model time; slow horizons are measured in eps^2 t."""
        return self.horizon / eps ** 2 if self.horizon_units == "slow" else self.horizon


@dataclass
class PerturbationConfig:
    modes: List[int] = field(default_factory= lambda: [1, 2])
    amplitude: float = 0.01
    parity: str = "any"

    def __post_init__(self):
        self.modes = [int(k) for k in self.modes]
        if not self.modes or min(self.modes) < 1:
            raise ConfigError(f"perturbation.modes must be indices >= 1 (alpha_0 is pinned), got {self.modes}")
        if self.parity not in ("any", "even", "odd"):
            raise ConfigError(f"perturbation.parity must be any, even or odd, got {self.parity!r}")
        self.amplitude = float(self.amplitude)

    def active_modes(self) -> List[int]:
        if self.parity == "even":
            return [k for k in self.modes if k % 2 == 0]
        if self.parity == "odd":
            return [k for k in self.modes if k % 2 == 1]
        return list(self.modes)


@dataclass
class ValidationConfig:
    sabotage_product_table: bool = False
    product_max_order: int = VALIDATION_PRODUCT_MAX_ORDER
    bilinear_pairs: int = VALIDATION_BILINEAR_PAIRS
    random_states: int = VALIDATION_RANDOM_STATES
    random_rhs: int = VALIDATION_RANDOM_RHS
    epsilons: Tuple[float, ...] = VALIDATION_EPSILONS


@dataclass
class RawModelConfig:
    """Raw (dimensional) model; `selection` is a library key or spec mapping."""
    r: float = 1.0
    kappa: float = 1.0
    alpha: float = 0.1
    x0: float = 0.0
    selection: Union[str, dict] = "quadratic"


@dataclass
class ExperimentConfig:
    selection: Union[str, dict] = "quadratic"
    sweep_selections: List[Union[str, dict]] = field(default_factory= list)
    epsilons: List[float] = field(default_factory= lambda: list(VALIDATION_EPSILONS))
    truncation: int = HERMITE_DEFAULT_TRUNCATION
    quadrature_order: int = HERMITE_QUADRATURE_ORDER
    r_tilde: float = STEADY_R_TILDE
    kappa: float = STEADY_KAPPA
    grid: GridConfig = field(default_factory= GridConfig)
    steady: SteadyConfig = field(default_factory= SteadyConfig)
    dynamics: DynamicsConfig = field(default_factory= DynamicsConfig)
    perturbation: PerturbationConfig = field(default_factory= PerturbationConfig)
    validation: ValidationConfig = field(default_factory= ValidationConfig)
    raw_model: Optional[RawModelConfig] = None
    library: dict = field(default_factory= dict)
    output_dir: str = ARTIFACT_DIR
    seed: int = VALIDATION_SEED
    override_admissibility: bool = False
    jobs: int = 1
    raw: dict = field(default_factory= dict, repr= False)

    def model_config(self, eps: float) -> ModelConfig:
        return ModelConfig(eps= eps, truncation= self.truncation, quadrature_order= self.quadrature_order,
                           grid= self.grid, r_tilde= self.r_tilde, kappa= self.kappa)

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        """
        Build and validate an ExperimentConfig from a merged YAML mapping.

        Raises
        ------
        ConfigError
            On unknown sections, wrong types or out-of-range values.
        """
        if not isinstance(raw, dict):
            raise ConfigError("experiment config must be a mapping")
        known = {"selection", "sweep_selections", "epsilons", "model", "grid", "steady", "dynamics",
                 "perturbation", "validation", "raw_model", "selections", "output_dir", "seed",
                 "override_admissibility", "jobs"}
        unknown = set(raw) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")

        epsilons = raw.get("epsilons", list(VALIDATION_EPSILONS))
        if isinstance(epsilons, (int, float)):
            epsilons = [epsilons]
        epsilons = sorted((_positive("epsilons", e) for e in epsilons), reverse= True)
        if not epsilons:
            raise ConfigError("epsilons must not be empty")

        model = _section(raw, "model")
        try:
            raw_model = RawModelConfig(**_section(raw, "raw_model")) if raw.get("raw_model") else None
            validation = dict(_section(raw, "validation"))
            if "epsilons" in validation:
                validation["epsilons"] = tuple(sorted((float(e) for e in validation["epsilons"]), reverse= True))
            config = cls(
                selection= raw.get("selection", "quadratic"),
                sweep_selections= list(raw.get("sweep_selections") or []),
                epsilons= epsilons,
                truncation= _positive("model.truncation", model.get("truncation", HERMITE_DEFAULT_TRUNCATION), integer= True),
                quadrature_order= _positive("model.quadrature_order", model.get("quadrature_order", HERMITE_QUADRATURE_ORDER), integer= True),
                r_tilde= float(model.get("r_tilde", STEADY_R_TILDE)),
                kappa= _positive("model.kappa", model.get("kappa", STEADY_KAPPA)),
                grid= GridConfig(**_section(raw, "grid")),
                steady= SteadyConfig(**_section(raw, "steady")),
                dynamics= DynamicsConfig(**_section(raw, "dynamics")),
                perturbation= PerturbationConfig(**_section(raw, "perturbation")),
                validation= ValidationConfig(**validation),
                raw_model= raw_model,
                library= dict(_section(raw, "selections")),
                output_dir= str(raw.get("output_dir", ARTIFACT_DIR)),
                seed= int(raw.get("seed", VALIDATION_SEED)),
                override_admissibility= bool(raw.get("override_admissibility", False)),
                jobs= _positive("jobs", raw.get("jobs", 1), integer= True),
                raw= raw,
            )
        except TypeError as e:
            raise ConfigError(f"bad config section: {e}") from e

        # building ModelConfig validates truncation against quadrature order
        config.model_config(epsilons[0])
        return config

    def to_dict(self) -> dict:
        data = asdict(self)
        data.pop("raw", None)
        return data
