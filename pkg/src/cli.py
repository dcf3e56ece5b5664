import sys
import argparse
from typing import List, Optional

from src.logger import logging, set_console_level
from src.exception import (CustomException, ConfigError, ValidationFailure, DivergenceError, NoRealRootError,
                           SingularOperatorError, BlowUpError)
from src.constants import (PIPELINE_NAME, PACKAGE_VERSION, EXIT_SUCCESS, EXIT_VALIDATION_FAILURE,
                           EXIT_SOLVER_DIVERGENCE, EXIT_CONFIG_ERROR, VALIDATION_SEED)
from src.entity.config_entity import ExperimentConfig
from src.pipeline.experiment_pipeline import ExperimentPipeline, SOLVER_FAILURES
from src.utils.main_utils import read_yaml_file, config_hash

SUBCOMMANDS = ("nondim", "steady", "evolve", "sweep", "validate")
EXIT_FAILURE = 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog= PIPELINE_NAME,
                                     description= "Hermite spectral engine and experiment harness for the infinitesimal model.")
    parser.add_argument("--version", action= "version", version= f"%(prog)s {PACKAGE_VERSION}")
    subparsers = parser.add_subparsers(dest= "command", required= True)
    for command in SUBCOMMANDS:
        sub = subparsers.add_parser(command)
        sub.add_argument("--config", required= True, help= "experiment YAML file")
        sub.add_argument("--out", default= None, help= "output directory (overrides output_dir)")
        sub.add_argument("--jobs", type= int, default= None, help= "worker processes for per-eps rows")
        sub.add_argument("--seed", type= int, default= None, help= "seed of the randomized property suites")
        sub.add_argument("--override-admissibility", action= "store_true",
                         help= "solve at inadmissible extrema instead of refusing")
        sub.add_argument("--log-level", default= None, choices= ["DEBUG", "INFO", "WARNING", "ERROR"],
                         help= "console log threshold (the log file always records DEBUG)")
    return parser


def load_config(args: argparse.Namespace):
    """Merge the YAML file with the command-line overrides; returns the config and its hash."""
    raw = read_yaml_file(args.config)
    if args.seed is not None:
        raw["seed"] = args.seed
    if args.override_admissibility:
        raw["override_admissibility"] = True
    # the hash covers neither the output location nor the worker count
    digest = config_hash(raw, raw.get("seed", VALIDATION_SEED))
    if args.out is not None:
        raw["output_dir"] = args.out
    if args.jobs is not None:
        raw["jobs"] = args.jobs
    return ExperimentConfig.from_dict(raw), digest


def exit_code_for(error: Exception) -> int:
    if isinstance(error, ConfigError):
        return EXIT_CONFIG_ERROR
    if isinstance(error, ValidationFailure):
        return EXIT_VALIDATION_FAILURE
    if isinstance(error, (DivergenceError, NoRealRootError, SingularOperatorError, BlowUpError)):
        return EXIT_SOLVER_DIVERGENCE
    return EXIT_FAILURE


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    if args.log_level is not None:
        set_console_level(args.log_level)
    try:
        config, digest = load_config(args)
        logging.info(f"{PIPELINE_NAME} {args.command}: config {args.config} (hash {digest[:12]}), output {config.output_dir}")
        pipeline = ExperimentPipeline(config, digest)
        table = getattr(pipeline, f"cmd_{args.command}")()
    except CustomException as e:
        code = exit_code_for(e)
        logging.error(f"{args.command} failed with exit code {code}: {e.raw_message}")
        return code

    failed = [row for row in table.rows if row.get("status") in SOLVER_FAILURES]
    if failed:
        logging.error(f"{len(failed)} rows of {table.name} ended in solver failure")
        return EXIT_SOLVER_DIVERGENCE
    return EXIT_SUCCESS


if __name__ == "__main__":
    sys.exit(main())
