import math
import numpy as np
import pandas as pd
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

from src.logger import logging
from src.exception import RangeError
from src.entity.config_entity import GridConfig


@dataclass(eq= False)
class GridDensity:
    """
    Density sampled on x_j = origin + j*spacing, j = 0..N-1.

    `frame` is "q" (trait coordinates, width of order eps) or "N" (rescaled
    coordinates N(x) = eps q(eps x), width of order one).
    """
    origin: float
    spacing: float
    values: np.ndarray
    frame: str = "N"
    eps: float = 1.0

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype= float)
        if self.frame not in ("q", "N"):
            raise ValueError(f"unknown frame {self.frame!r}")

    @classmethod
    def on_grid(cls, function, grid: GridConfig, frame: str = "N", eps: float = 1.0) -> "GridDensity":
        """Sample `function` on the symmetric grid of `grid`, scaled by eps in the q-frame."""
        half_width = grid.half_width * (eps if frame == "q" else 1.0)
        spacing = 2.0 * half_width / (grid.points - 1)
        x = -half_width + spacing * np.arange(grid.points)
        return cls(origin= -half_width, spacing= spacing, values= function(x), frame= frame, eps= eps)

    @property
    def size(self) -> int:
        return int(self.values.size)

    @property
    def points(self) -> np.ndarray:
        return self.origin + self.spacing * np.arange(self.size)

    @property
    def trapezoid_weights(self) -> np.ndarray:
        weights = np.full(self.size, self.spacing)
        weights[0] = weights[-1] = 0.5 * self.spacing
        return weights

    @property
    def mass(self) -> float:
        return float(self.spacing * np.sum(self.values))

    def with_values(self, values) -> "GridDensity":
        return GridDensity(self.origin, self.spacing, np.asarray(values, dtype= float), self.frame, self.eps)

    def normalized(self) -> "GridDensity":
        return self.with_values(self.values / self.mass)

    def to_frame(self, frame: str) -> "GridDensity":
        """Exact change of variables between the q- and N-frames (grid rescaled, no interpolation)."""
        if frame == self.frame:
            return self
        if frame == "N":
            return GridDensity(self.origin / self.eps, self.spacing / self.eps, self.values * self.eps, "N", self.eps)
        return GridDensity(self.origin * self.eps, self.spacing * self.eps, self.values / self.eps, "q", self.eps)


@dataclass(eq= False)
class MomentVector:
    """
    Mass, mean and central moments of a density, tagged with its frame.

    `central[k]` is the k-th central moment for 0 <= k <= k_max (central[0] = 1,
    central[1] = 0 for normalized densities).
    """
    frame: str
    eps: float
    m0: float
    m1: float
    central: np.ndarray
    absolute: Optional[np.ndarray] = None
    truncation_warning: bool = False

    @property
    def k_max(self) -> int:
        return int(self.central.size - 1)

    def central_moment(self, k: int) -> float:
        if k < 0 or k > self.k_max:
            raise RangeError(f"central moment of order {k} not stored (k_max = {self.k_max})")
        return float(self.central[k])


@dataclass(eq= False)
class SpectralSelectionData:
    """Hermite data of m_eps(x) = m(eps x) up to the truncation K."""
    eps: float
    coefficients: np.ndarray
    matrix: np.ndarray
    m0: float
    norm: float
    m1_abs: float
    node_minimum: float
    selection_name: str = ""

    @property
    def truncation(self) -> int:
        return int(self.coefficients.size - 1)

    @property
    def d_eps(self) -> float:
        """(H_0, m_eps H_0) - (H_1, m_eps H_1)."""
        return float(self.matrix[0, 0] - self.matrix[1, 1])


@dataclass(eq= False)
class SteadySolution:
    coefficients: np.ndarray
    residual: float
    iterations: int
    eps: float
    rho_bar: float
    neighborhood_constant: float
    k0: Optional[int] = None
    update_norms: List[float] = field(default_factory= list)
    selection_name: str = ""

    @property
    def alpha1(self) -> float:
        return float(self.coefficients[1])

    @property
    def tail(self) -> np.ndarray:
        return self.coefficients[2:]

    def to_grid(self, grid: GridConfig, frame: str = "q") -> GridDensity:
        """Synthesize the density on `grid` in the requested frame."""
        from src.components.diagnostics import grid_from_coefficients
        return grid_from_coefficients(self.coefficients, grid, self.eps, frame= frame)


@dataclass(eq= False)
class Trajectory:
    """
    Time series of states. Galerkin states are coefficient vectors; grid states
    are value arrays on the (fixed) grid described by `grid_origin`/`grid_spacing`.
    """
    times: np.ndarray
    states: List[np.ndarray]
    representation: str
    eps: float
    distances: Optional[np.ndarray] = None
    mass_drift: Optional[np.ndarray] = None
    parity_leakage: Optional[np.ndarray] = None
    selection_average: Optional[np.ndarray] = None
    mean_trace: Optional[np.ndarray] = None
    grid_origin: Optional[float] = None
    grid_spacing: Optional[float] = None
    frame: str = "N"
    steps: int = 0

    def density(self, index: int) -> GridDensity:
        if self.representation != "grid":
            raise ValueError("density snapshots exist only for grid trajectories")
        return GridDensity(self.grid_origin, self.grid_spacing, self.states[index], self.frame, self.eps)


@dataclass(eq= False)
class MassState:
    times: np.ndarray
    rho: np.ndarray
    r_tilde: float
    kappa: float

    @property
    def final(self) -> float:
        return float(self.rho[-1])


@dataclass
class DecayFit:
    rate: float
    r_squared: float
    window: Tuple[float, float]
    points: int


@dataclass
class AdmissibilityResult:
    admissible: bool
    margin: float
    m_minus: float
    minimum_location: float
    value_at_extremum: float


@dataclass
class OmegaEtaMass:
    eta: float
    mass_in_omega: float
    bound: float
    tolerance: float = 1e-6

    @property
    def satisfied(self) -> bool:
        return self.mass_in_omega >= self.bound - self.tolerance


@dataclass
class AssumptionCheck:
    name: str
    status: str
    witnesses: Dict[str, float] = field(default_factory= dict)
    note: str = ""


@dataclass
class AssumptionReport:
    selection_name: str
    eps: float
    checks: List[AssumptionCheck] = field(default_factory= list)

    def __getitem__(self, name: str) -> AssumptionCheck:
        for check in self.checks:
            if check.name == name:
                return check
        raise KeyError(name)

    def to_dataframe(self) -> pd.DataFrame:
        return pd.DataFrame([{"assumption": c.name, "status": c.status, "note": c.note, **c.witnesses} for c in self.checks])


@dataclass
class RawModel:
    """Dimensional model: rates r (1/time), kappa (1/(time mass)), segregation std-dev alpha (trait units)."""
    r: float
    kappa: float
    alpha: float
    selection: object
    x0: float = 0.0


@dataclass
class NondimModel:
    """Rescaled model; `kappa` is the nondimensional competition (1), `raw_kappa` the original one."""
    eps: float
    selection: object
    r_tilde: float
    trait_scale: float
    time_scale: float
    kappa: float = 1.0
    x0: float = 0.0
    r: float = 1.0
    raw_kappa: float = 1.0


@dataclass
class ColumnSpec:
    name: str
    unit: str = "1"
    provenance: str = ""

    def to_dict(self) -> dict:
        return {"name": self.name, "unit": self.unit, "provenance": self.provenance}


@dataclass
class ResultTable:
    """
    Fixed-schema result table. Cells that are missing or non-finite are
    emitted empty; failures are carried by the `status` column.
    """
    name: str
    columns: List[ColumnSpec]
    rows: List[dict] = field(default_factory= list)
    metadata: dict = field(default_factory= dict)

    @property
    def column_names(self) -> List[str]:
        return [c.name for c in self.columns]

    def add_row(self, **values) -> None:
        unknown = set(values) - set(self.column_names)
        if unknown:
            raise KeyError(f"columns {sorted(unknown)} are not in the schema of table {self.name}")
        self.rows.append(values)

    def to_dataframe(self) -> pd.DataFrame:
        records = []
        for row in self.rows:
            record = {}
            for name in self.column_names:
                value = row.get(name, "")
                if isinstance(value, (float, np.floating)) and not math.isfinite(float(value)):
                    logging.warning(f"non-finite value in {self.name}.{name} emitted as empty cell")
                    value = ""
                record[name] = value
            records.append(record)
        return pd.DataFrame(records, columns= self.column_names)
