import os
import sys
import time
import numpy as np
import pandas as pd
from functools import lru_cache
from typing import List, Optional, Tuple
from joblib import Parallel, delayed

from src.logger import logging
from src.exception import (CustomException, ConfigError, DegenerateExtremumError, ModelDomainError, DivergenceError,
                           NoRealRootError, SingularOperatorError, DegeneratePivotError, InadmissibleError,
                           BlowUpError, FitError, StepSizeError, DomainTooSmallError, ValidationFailure)
from src.constants import STEADY_OBJECT_FILE_NAME, DIAGNOSTICS_DEFAULT_MOMENT_ORDER
from src.components.hermite_core import HermiteBasis, quadrature_rule
from src.components.model import nondimensionalize, check_admissibility, omega_eta_mass
from src.components.operators import selection_data
from src.components.steady_solver import steady_fixed_point, steady_grid_oracle
from src.components.dynamics import (integrate_galerkin, integrate_grid, integrate_mass, decay_rate, perturbed_state)
from src.components.diagnostics import (concentration_table, gaussian_distance, coefficients_from_grid,
                                        grid_from_coefficients)
from src.entity.config_entity import ExperimentConfig, SteadyProblem
from src.entity.selection import build_selection
from src.pipeline.validation_suite import ValidationSuite
from src.entity.artifact_entity import RawModel, ResultTable, ColumnSpec, SteadySolution
from src.utils.main_utils import write_result_table, save_object, write_trajectory_binary

# failures that make a row, keyed to their status label
STATUS_LABELS = (
    (DegenerateExtremumError, "degenerate-extremum"),
    (ModelDomainError, "domain-error"),
    (NoRealRootError, "no-real-root"),
    (SingularOperatorError, "singular-operator"),
    (DegeneratePivotError, "degenerate-pivot"),
    (DivergenceError, "divergence"),
    (InadmissibleError, "inadmissible"),
    (BlowUpError, "blow-up"),
    (StepSizeError, "step-size"),
    (DomainTooSmallError, "domain-too-small"),
    (FitError, "fit-error"),
)
SOLVER_FAILURES = {"divergence", "no-real-root", "singular-operator", "blow-up"}


def status_of(error: Exception) -> str:
    for kind, label in STATUS_LABELS:
        if isinstance(error, kind):
            return label
    return "error"


def _message(error: Exception) -> str:
    return getattr(error, "raw_message", str(error))


@lru_cache(maxsize= 4)
def _basis(K: int) -> HermiteBasis:
    return HermiteBasis(K)


STEADY_COLUMNS = [
    ColumnSpec("selection", "-", "selection library name"),
    ColumnSpec("eps", "1", "nondimensional segregation parameter"),
    ColumnSpec("status", "-", "ok or failure label"),
    ColumnSpec("admissibility_margin", "1", "m_- + 1 - m(0)"),
    ColumnSpec("alpha1", "1", "first Hermite coefficient"),
    ColumnSpec("tail_norm", "1", "l2 norm of alpha_k, k >= 2"),
    ColumnSpec("residual", "1", "l2 residual of the truncated steady equations"),
    ColumnSpec("iterations", "1", "spectral fixed-point iterations"),
    ColumnSpec("neighborhood_constant", "1", "max(|alpha_1|/eps, |tail|/eps^2)"),
    ColumnSpec("k0", "1", "measured k0 of the L-inverse bound"),
    ColumnSpec("gaussian_distance", "1", "L2(G_eps^-1) distance to the tilted Gaussian"),
    ColumnSpec("distance_ratio", "1", "gaussian_distance / eps^2"),
    ColumnSpec("mean_ratio", "1", "|M_1| / eps^2, q-frame"),
    ColumnSpec("variance", "trait^2", "M_2 central, q-frame"),
] + [ColumnSpec(f"c{k}", "1", f"|M_{k} - eps^{k} sigma_{k}| / eps^{k + 2}, q-frame") for k in range(2, DIAGNOSTICS_DEFAULT_MOMENT_ORDER + 1)] + [
    ColumnSpec("rho_bar", "mass", "steady population size (r~ - int m q)/kappa"),
    ColumnSpec("grid_discrepancy", "1", "relative L2(G_eps^-1) distance to the grid oracle"),
    ColumnSpec("omega_mass_eta_0.5", "1", "mass in Omega_eta, eta = 0.5 (bound 1/3)"),
    ColumnSpec("omega_mass_eta_1", "1", "mass in Omega_eta, eta = 1 (bound 1/2)"),
    ColumnSpec("trace_path", "-", "iteration trace written on divergence"),
    ColumnSpec("note", "-", "failure message"),
]


def steady_row(config: ExperimentConfig, selection_spec, eps: float) -> Tuple[dict, Optional[SteadySolution], Optional[List[float]]]:
    """
    One steady summary row: spectral solve, concentration ratios, optional grid
    oracle. Returns the row, the solution (None on failure) and the iteration
    trace of a diverged solve. Runs inside worker processes; writes nothing.
    """
    m = build_selection(selection_spec, config.library)
    row = {"selection": m.name, "eps": eps, "status": "ok"}
    admissibility = check_admissibility(m, m.extremum)
    row["admissibility_margin"] = admissibility.margin
    if not admissibility.admissible and not config.override_admissibility:
        row.update(status= "inadmissible", note= f"refused: admissibility margin {admissibility.margin:.6g} <= 0")
        return row, None, None

    model = config.model_config(eps)
    try:
        data = selection_data(m, eps, _basis(model.truncation), quadrature_rule(model.quadrature_order))
        problem = SteadyProblem(data= data, truncation= model.truncation, tolerance= config.steady.spectral_tolerance,
                                max_iterations= config.steady.max_iterations,
                                neighborhood_constant= config.steady.neighborhood_constant,
                                damping= config.steady.spectral_damping)
        solution = steady_fixed_point(problem, r_tilde= model.r_tilde, kappa= model.kappa)
    except CustomException as e:
        row.update(status= status_of(e), note= _message(e))
        return row, None, getattr(e, "trace", None)

    moments = concentration_table(solution, eps, DIAGNOSTICS_DEFAULT_MOMENT_ORDER, frame= "q").set_index("k")
    distance = gaussian_distance(solution)
    row.update(
        alpha1= solution.alpha1,
        tail_norm= float(np.linalg.norm(solution.tail)),
        residual= solution.residual,
        iterations= solution.iterations,
        neighborhood_constant= solution.neighborhood_constant,
        k0= -1 if solution.k0 is None else solution.k0,
        gaussian_distance= distance,
        distance_ratio= distance / eps ** 2,
        mean_ratio= float(moments.loc[1, "deviation_ratio"]),
        variance= float(moments.loc[2, "central_moment"]),
        rho_bar= solution.rho_bar,
        **{f"c{k}": float(moments.loc[k, "deviation_ratio"]) for k in range(2, DIAGNOSTICS_DEFAULT_MOMENT_ORDER + 1)},
    )

    density = solution.to_grid(model.grid, frame= "q")
    if config.steady.grid_oracle:
        try:
            oracle = steady_grid_oracle(m, eps, model.grid, config.steady.grid_tolerance,
                                        config.steady.grid_max_iterations, config.steady.grid_damping)
            projected = coefficients_from_grid(oracle, model.truncation)
            row["grid_discrepancy"] = float(np.linalg.norm(projected - solution.coefficients) / np.linalg.norm(solution.coefficients))
            density = oracle
        except CustomException as e:
            row.update(status= f"oracle-{status_of(e)}", note= _message(e))

    row["omega_mass_eta_0.5"] = omega_eta_mass(density, m, 0.5).mass_in_omega
    row["omega_mass_eta_1"] = omega_eta_mass(density, m, 1.0).mass_in_omega
    return row, solution, None


EVOLVE_COLUMNS = [
    ColumnSpec("selection", "-", "selection library name"),
    ColumnSpec("eps", "1", "nondimensional segregation parameter"),
    ColumnSpec("status", "-", "ok or failure label"),
    ColumnSpec("horizon", "time", "integration horizon in model time"),
    ColumnSpec("modes", "-", "perturbed Hermite modes"),
    ColumnSpec("initial_distance", "1", "|beta(0)|"),
    ColumnSpec("final_distance", "1", "|beta(T)|"),
    ColumnSpec("rate", "1/time", "fitted decay rate lambda of |beta(t)|"),
    ColumnSpec("fit_r2", "1", "coefficient of determination of the log-linear fit"),
    ColumnSpec("rate_over_eps2", "1", "lambda / eps^2"),
    ColumnSpec("rate_ratio", "1", "lambda(eps) / lambda(previous, larger eps)"),
    ColumnSpec("parity_leakage", "1", "max |alpha_k(t)|, k odd"),
    ColumnSpec("mass_drift", "1/time", "grid mass drift per unit time before renormalization"),
    ColumnSpec("final_population", "mass", "rho(T) from the mass equation, rho(0) = 1"),
    ColumnSpec("grid_rate", "1/time", "decay rate of the grid integrator"),
    ColumnSpec("rate_disagreement", "1", "|grid_rate - rate| / rate"),
    ColumnSpec("steps", "1", "Galerkin time steps"),
    ColumnSpec("trajectory_path", "-", "IFSM snapshot file"),
    ColumnSpec("note", "-", "failure message"),
]


def evolve_row(config: ExperimentConfig, eps: float) -> Tuple[dict, Optional[object]]:
    """One stability run: steady reference, perturbed Galerkin (and optional grid) integration, decay fit."""
    m = build_selection(config.selection, config.library)
    model = config.model_config(eps)
    modes = config.perturbation.active_modes()
    horizon = config.dynamics.horizon_for(eps)
    row = {"selection": m.name, "eps": eps, "status": "ok", "horizon": horizon, "modes": " ".join(map(str, modes))}

    try:
        data = selection_data(m, eps, _basis(model.truncation), quadrature_rule(model.quadrature_order))
        reference = steady_fixed_point(SteadyProblem(data= data, truncation= model.truncation,
                                                     tolerance= config.steady.spectral_tolerance,
                                                     max_iterations= config.steady.max_iterations),
                                       r_tilde= model.r_tilde, kappa= model.kappa)
        initial = perturbed_state(reference.coefficients, modes, config.perturbation.amplitude)
        trajectory = integrate_galerkin(initial, data, horizon, reference= reference.coefficients,
                                        max_step= config.dynamics.max_step,
                                        growth_constant= config.dynamics.growth_step_constant,
                                        blow_up_guard= config.dynamics.blow_up_guard,
                                        snapshot_stride= config.dynamics.snapshot_stride)
    except CustomException as e:
        row.update(status= status_of(e), note= _message(e))
        return row, None

    row.update(initial_distance= float(trajectory.distances[0]), final_distance= float(trajectory.distances[-1]),
               parity_leakage= float(np.max(trajectory.parity_leakage)), steps= trajectory.steps)
    mass = integrate_mass(1.0, (trajectory.times, trajectory.selection_average), model.r_tilde, model.kappa)
    row["final_population"] = mass.final

    try:
        fit = decay_rate(trajectory, reference, config.dynamics.fit_window)
        row.update(rate= fit.rate, fit_r2= fit.r_squared, rate_over_eps2= fit.rate / eps ** 2)
    except FitError as e:
        row.update(status= "fit-error", note= _message(e))
        return row, trajectory

    if config.dynamics.grid_oracle:
        try:
            start = grid_from_coefficients(initial, model.grid, eps, frame= "N")
            start = start.with_values(np.maximum(start.values, 0.0))
            grid_trajectory = integrate_grid(start, m, eps, horizon, reference= reference.coefficients,
                                             max_step= config.dynamics.max_step,
                                             snapshot_stride= config.dynamics.snapshot_stride,
                                             method= model.grid.convolution)
            grid_fit = decay_rate(grid_trajectory, None, config.dynamics.fit_window)
            row.update(grid_rate= grid_fit.rate, rate_disagreement= abs(grid_fit.rate - fit.rate) / fit.rate,
                       mass_drift= float(np.max(grid_trajectory.mass_drift)))
        except CustomException as e:
            row.update(status= f"oracle-{status_of(e)}", note= _message(e))
    return row, trajectory


class ExperimentPipeline:
    """
    Runs the harness subcommands on one experiment configuration.

    Each `cmd_*` stage builds a ResultTable, writes it (CSV + metadata
    sidecar) and returns it. Per-epsilon work is dispatched to a joblib pool;
    rows come back in configured epsilon order and only this process writes files.
    """

    def __init__(self, config: ExperimentConfig, config_digest: str, out_dir: Optional[str] = None):
        self.config = config
        self.config_digest = config_digest
        self.out_dir = out_dir or config.output_dir

    def _pool(self) -> Parallel:
        return Parallel(n_jobs= self.config.jobs, backend= "loky" if self.config.jobs > 1 else "sequential")

    def _emit(self, table: ResultTable, started: float) -> ResultTable:
        write_result_table(table, self.out_dir, self.config_digest, time.time() - started)
        return table

    def cmd_nondim(self) -> ResultTable:
        """Nondimensionalize the raw model of the config and emit its scales and sampled m~."""
        try:
            logging.info("------------------------------------------------------------------------------------------------")
            logging.info("Starting nondim stage...")
            started = time.time()
            raw_config = self.config.raw_model
            if raw_config is None:
                raise ConfigError("the nondim subcommand needs a raw_model section")

            samples = (-1.0, -0.5, 0.5, 1.0)
            table = ResultTable("nondim", [
                ColumnSpec("selection", "-", "raw selection function"),
                ColumnSpec("status", "-", "ok or failure label"),
                ColumnSpec("eps", "1", "alpha sqrt(|m''(x0)|/r)"),
                ColumnSpec("r_tilde", "1", "1 - m(x0)/r"),
                ColumnSpec("trait_scale", "trait", "sqrt(r/|m''(x0)|)"),
                ColumnSpec("time_scale", "time", "1/r"),
                ColumnSpec("curvature_sign", "1", "sign of m~''(0)"),
            ] + [ColumnSpec(f"m_tilde_{y:g}", "1", f"m~ at y = {y:g}") for y in samples] + [ColumnSpec("note", "-", "failure message")])
            profile = ResultTable("nondim_profile", [ColumnSpec("y", "1", "rescaled trait"), ColumnSpec("m_tilde", "1", "normalized selection")])

            selection = build_selection(raw_config.selection, self.config.library)
            row = {"selection": selection.name, "status": "ok"}
            try:
                model = nondimensionalize(RawModel(r= raw_config.r, kappa= raw_config.kappa, alpha= raw_config.alpha,
                                                   selection= selection, x0= raw_config.x0))
                row.update(eps= model.eps, r_tilde= model.r_tilde, trait_scale= model.trait_scale,
                           time_scale= model.time_scale, curvature_sign= model.selection.curvature_sign(),
                           **{f"m_tilde_{y:g}": float(model.selection(y)) for y in samples})
                for y in np.linspace(-3.0, 3.0, 121):
                    profile.add_row(y= float(y), m_tilde= float(model.selection(y)))
            except (DegenerateExtremumError, ModelDomainError) as e:
                row.update(status= status_of(e), note= _message(e))
            table.add_row(**row)

            self._emit(profile, started)
            self._emit(table, started)
            logging.info("nondim stage completed")
            return table
        except CustomException:
            raise
        except Exception as e:
            raise CustomException(e, sys) from e

    def _steady_table(self, name: str, tasks: List[Tuple[object, float]]) -> ResultTable:
        started = time.time()
        results = self._pool()(delayed(steady_row)(self.config, spec, eps) for spec, eps in tasks)

        table = ResultTable(name, list(STEADY_COLUMNS))
        for row, solution, trace in results:
            stem = f"{row['selection']}_eps{row['eps']:g}"
            if solution is not None:
                save_object(os.path.join(self.out_dir, f"{stem}_{STEADY_OBJECT_FILE_NAME}"), solution)
            if trace:
                row["trace_path"] = os.path.join(self.out_dir, f"{stem}_trace.csv")
                os.makedirs(self.out_dir, exist_ok= True)
                pd.DataFrame({"iteration": np.arange(1, len(trace) + 1), "update_norm": trace}).to_csv(row["trace_path"], index= False)
            table.add_row(**row)
        return self._emit(table, started)

    def cmd_steady(self) -> ResultTable:
        """Steady summaries of the configured selection for every epsilon."""
        try:
            logging.info("------------------------------------------------------------------------------------------------")
            logging.info("Starting steady stage...")
            table = self._steady_table("steady", [(self.config.selection, eps) for eps in self.config.epsilons])
            logging.info("steady stage completed")
            return table
        except CustomException:
            raise
        except Exception as e:
            raise CustomException(e, sys) from e

    def cmd_sweep(self) -> ResultTable:
        """Steady summaries over the product of the sweep selections and the epsilon list."""
        try:
            logging.info("------------------------------------------------------------------------------------------------")
            logging.info("Starting sweep stage...")
            selections = self.config.sweep_selections or [self.config.selection]
            tasks = [(spec, eps) for spec in selections for eps in self.config.epsilons]
            logging.info(f"sweeping {len(selections)} selections x {len(self.config.epsilons)} epsilons on {self.config.jobs} workers")
            table = self._steady_table("sweep", tasks)
            logging.info("sweep stage completed")
            return table
        except CustomException:
            raise
        except Exception as e:
            raise CustomException(e, sys) from e

    def cmd_evolve(self) -> ResultTable:
        """Perturbed-steady-state integrations, decay fits and trajectory files for every epsilon."""
        try:
            logging.info("------------------------------------------------------------------------------------------------")
            logging.info("Starting evolve stage...")
            started = time.time()
            results = self._pool()(delayed(evolve_row)(self.config, eps) for eps in self.config.epsilons)

            table = ResultTable("evolve", list(EVOLVE_COLUMNS))
            series = ResultTable("evolve_series", [ColumnSpec("selection", "-", ""), ColumnSpec("eps", "1", ""),
                                                   ColumnSpec("t", "time", ""), ColumnSpec("distance", "1", "|beta(t)|")])
            previous_rate = None
            for row, trajectory in results:
                if "rate" in row and previous_rate:
                    row["rate_ratio"] = row["rate"] / previous_rate
                previous_rate = row.get("rate")
                if trajectory is not None:
                    if self.config.dynamics.write_trajectories:
                        path = os.path.join(self.out_dir, f"{row['selection']}_eps{row['eps']:g}.ifsm")
                        write_trajectory_binary(path, trajectory.times, trajectory.states, self.config.dynamics.snapshot_stride)
                        row["trajectory_path"] = path
                    for t, d in zip(trajectory.times, trajectory.distances):
                        series.add_row(selection= row["selection"], eps= row["eps"], t= float(t), distance= float(d))
                table.add_row(**row)

            self._emit(series, started)
            self._emit(table, started)
            logging.info("evolve stage completed")
            return table
        except CustomException:
            raise
        except Exception as e:
            raise CustomException(e, sys) from e

    def cmd_validate(self) -> ResultTable:
        """
        Run the property suite and emit its pass/fail table.

        Raises
        ------
        ValidationFailure
            After the table is written, if any check failed.
        """
        try:
            logging.info("------------------------------------------------------------------------------------------------")
            logging.info("Starting validate stage...")
            started = time.time()
            suite = ValidationSuite(self.config)
            table = self._emit(suite.run(), started)
            failures = suite.failures
            if failures:
                raise ValidationFailure(f"{len(failures)} validation checks failed: "
                                        f"{', '.join(sorted({row['check'] for row in failures}))}")
            logging.info("validate stage completed")
            return table
        except CustomException:
            raise
        except Exception as e:
            raise CustomException(e, sys) from e
