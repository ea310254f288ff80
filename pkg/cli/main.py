"""
tensorheston CLI - Scenario runner for the tensor Heston model.

Provides subcommands for:
- simulate: Simulate Y (and X) paths and write them as CSV
- analytics: Closed-form and Monte Carlo laws of Y, V and X
- forward: Forward-curve covariances in the Filipovic space
- project: CIR projection of the variance
- validate: Run the identity and property suite
- run: Every output of a scenario

Exit codes: 0 success, 1 validation failure or a failed quantity, 2 configuration error.
"""

import argparse
import sys
from pathlib import Path
from typing import Iterable, List, Optional

# Add parent directory to path for imports
sys.path.insert(0, str(Path(__file__).parent.parent))

from config.settings import get_config
from tensorheston.errors import ConfigurationError
from tensorheston.exporters import export_all
from tensorheston.filipovic import read_curve_csv, write_curve_csv
from tensorheston.logger import HestonLogger, get_logger
from tensorheston.ou_engine import semigroup, simulate_Y_paths
from tensorheston.runner import run_scenario
from tensorheston.scenario import ScenarioConfig, load_scenario
from tensorheston.validation import validate_all
from tensorheston.vol_ou import simulate_X_paths

EXIT_SUCCESS = 0
EXIT_FAILURE = 1
EXIT_CONFIG_ERROR = 2

ANALYTICS_QUANTITIES = (
    "char_Y",
    "char_V",
    "cov_Y",
    "stationary_cov_Y",
    "exp_moment_bound",
    "cov_X",
    "cond_char_X",
)


def load_config(args: argparse.Namespace) -> ScenarioConfig:
    """Load the scenario named by --config and apply --seed-override."""
    if not args.config:
        raise ConfigurationError("a scenario file is required", field="config")
    config = load_scenario(args.config)
    if args.seed_override is not None:
        config = config.with_seed(args.seed_override)
    return config


def output_dir_for(args: argparse.Namespace, config: Optional[ScenarioConfig]) -> Path:
    """--out, or Paths.output_dir/<scenario slug>."""
    if args.out:
        return Path(args.out)
    base = get_config().get_path("Paths", "output_dir", fallback="data/outputs")
    return base / (config.slug if config is not None else "validation")


def run_logger(config: Optional[ScenarioConfig]) -> HestonLogger:
    slug = config.slug if config is not None else "validation"
    return get_logger(f"tensorheston.run.{slug}", slug=slug)


def config_error_exit(logger: HestonLogger, error: ConfigurationError) -> int:
    print(f"Configuration error: {error}", file=sys.stderr)
    return logger.log_error_exit(
        f"Invalid configuration: {error}", exit_code=EXIT_CONFIG_ERROR, field=error.field
    )


def print_outputs(output_files: dict):
    for name, path in output_files.items():
        print(f"  {name}: {path}")


def results_command(
    args: argparse.Namespace,
    operation: str,
    quantities: Optional[Iterable[str]] = None,
    config: Optional[ScenarioConfig] = None,
) -> int:
    """Run the selected outputs of a scenario and write results.json."""
    logger = get_logger("tensorheston.cli")
    try:
        config = config or load_config(args)
    except ConfigurationError as e:
        return config_error_exit(logger, e)

    logger = run_logger(config)
    logger.log_start(operation, scenario=config.name, seed=config.mc.seed, threads=args.threads)

    try:
        records = run_scenario(config, threads=args.threads, logger=logger, quantities=quantities)
        output_files = export_all(
            output_dir_for(args, config),
            records=records,
            scenario=config.name,
            logger=logger,
        )
    except ConfigurationError as e:
        return config_error_exit(logger, e)
    except Exception as e:
        logger.exception(f"{operation} failed", error=str(e))
        return EXIT_FAILURE

    failed = [record.name for record in records if record.error is not None]
    logger.log_complete(operation, records=len(records), failed=len(failed))

    print(f"\nComputed {len(records)} quantities for '{config.name}':")
    print_outputs(output_files)
    if failed:
        print(f"Failed quantities: {', '.join(failed)}", file=sys.stderr)
        return EXIT_FAILURE
    return EXIT_SUCCESS


def simulate_command(args: argparse.Namespace) -> int:
    """Simulate paths on the scenario grid and write paths_Y.csv (and paths_X.csv)."""
    logger = get_logger("tensorheston.cli")
    try:
        config = load_config(args)
        spec = config.model.x_spec() if config.model.has_x else None
        ou = spec.ou if spec is not None else config.model.ou_spec()
    except ConfigurationError as e:
        return config_error_exit(logger, e)
    except Exception as e:
        logger.exception("Model build failed", error=str(e))
        return EXIT_FAILURE

    logger = run_logger(config)
    record = "terminal" if args.terminal_only else "all"
    logger.log_start(
        "simulate",
        scenario=config.name,
        path_count=config.mc.path_count,
        steps=config.grid.steps,
        seed=config.mc.seed,
    )

    try:
        kwargs = dict(scheme=config.mc.scheme, record=record, threads=args.threads)
        if spec is not None:
            ensemble = simulate_X_paths(
                spec, config.grid, config.mc.path_count, config.mc.seed, **kwargs
            )
        else:
            ensemble = simulate_Y_paths(
                ou, config.grid, config.mc.path_count, config.mc.seed, **kwargs
            )
        output_files = export_all(output_dir_for(args, config), ensemble=ensemble, logger=logger)
    except ConfigurationError as e:
        return config_error_exit(logger, e)
    except Exception as e:
        logger.exception("Simulation failed", error=str(e))
        return EXIT_FAILURE

    logger.log_complete("simulate", path_count=ensemble.path_count)
    print(f"\nSimulated {ensemble.path_count} paths for '{config.name}':")
    print_outputs(output_files)
    return EXIT_SUCCESS


def forward_command(args: argparse.Namespace) -> int:
    """
    Forward covariances; with --curve the initial forward curve is read from CSV and the
    expected curve at the grid horizon is written next to the results.
    """
    if not args.curve:
        return results_command(args, "forward", quantities=["forward_cov"])

    logger = get_logger("tensorheston.cli")
    try:
        config = load_config(args)
        frame = config.model.filipovic_model().frame
        curve = read_curve_csv(args.curve, frame.space)
    except ConfigurationError as e:
        return config_error_exit(logger, e)
    except Exception as e:
        logger.exception("Reading the initial curve failed", error=str(e))
        return EXIT_FAILURE

    config.model.X0 = frame.coordinates(curve)
    output_dir = output_dir_for(args, config)
    expected = semigroup(config.model.C, config.grid.t_end) @ config.model.X0
    path = write_curve_csv(output_dir / "forward_curve.csv", frame.to_curve(expected))
    print(f"\nExpected forward curve at t={config.grid.t_end}: {path}")

    return results_command(args, "forward", quantities=["forward_cov"], config=config)


def validate_command(args: argparse.Namespace) -> int:
    """Run the validation suite on the scenario model, or on a default model."""
    logger = get_logger("tensorheston.cli")
    config = None
    try:
        if args.config:
            config = load_config(args)
    except ConfigurationError as e:
        return config_error_exit(logger, e)

    logger = run_logger(config)
    logger.log_start("validate", scenario=config.name if config else None)
    try:
        model = config.model if config is not None else None
        report = validate_all(
            config if model is not None and model.has_y else None,
            dim=args.dim or (model.dim if model is not None else None),
            path_count=args.path_count,
            seed=args.seed_override,
            threads=args.threads,
            logger=logger,
        )
        output_files = export_all(output_dir_for(args, config), report=report, logger=logger)
    except ConfigurationError as e:
        return config_error_exit(logger, e)
    except Exception as e:
        logger.exception("Validation failed", error=str(e))
        return EXIT_FAILURE

    passed = sum(1 for check in report.checks if check.passed)
    logger.log_complete("validate", passed=passed, total=len(report.checks))
    print(f"\nValidation: {passed}/{len(report.checks)} checks passed")
    print_outputs(output_files)
    if not report.passed:
        print(f"Failed checks: {', '.join(report.failed_checks)}", file=sys.stderr)
        return EXIT_FAILURE
    return EXIT_SUCCESS


def add_common_arguments(parser: argparse.ArgumentParser, config_required: bool = True):
    parser.add_argument(
        "-c",
        "--config",
        required=config_required,
        help="Scenario JSON file",
    )
    parser.add_argument(
        "-o",
        "--out",
        help="Output directory (default: Paths.output_dir/<scenario>)",
    )
    parser.add_argument(
        "--threads",
        type=int,
        help="Worker threads for Monte Carlo work (default: Simulation.threads)",
    )
    parser.add_argument(
        "--seed-override",
        type=int,
        help="Replace the scenario seed",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tensorheston",
        description="tensorheston - Tensor Heston stochastic volatility simulation and analytics",
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    subparsers = parser.add_subparsers(dest="command", help="Available commands")

    simulate_parser = subparsers.add_parser("simulate", help="Simulate paths and write CSV")
    add_common_arguments(simulate_parser)
    simulate_parser.add_argument(
        "--terminal-only",
        action="store_true",
        help="Write only the terminal state of each path",
    )

    analytics_parser = subparsers.add_parser(
        "analytics", help="Laws of Y, V and X (char_Y, char_V, cov_Y, cov_X, ...)"
    )
    add_common_arguments(analytics_parser)

    forward_parser = subparsers.add_parser(
        "forward", help="Forward-curve covariances in the Filipovic space"
    )
    add_common_arguments(forward_parser)
    forward_parser.add_argument(
        "--curve",
        help="CSV (maturity, forward_value) with the initial forward curve",
    )

    project_parser = subparsers.add_parser("project", help="CIR projection of the variance")
    add_common_arguments(project_parser)

    validate_parser = subparsers.add_parser("validate", help="Run the validation suite")
    add_common_arguments(validate_parser, config_required=False)
    validate_parser.add_argument(
        "--dim",
        type=int,
        help="Rank of the default model (default: Validation.dim)",
    )
    validate_parser.add_argument(
        "--path-count",
        type=int,
        help="Monte Carlo paths per check (default: Validation.path_count)",
    )

    run_parser = subparsers.add_parser("run", help="Compute every output of a scenario")
    add_common_arguments(run_parser)

    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """Main CLI entry point."""
    parser = build_parser()
    args = parser.parse_args(argv)

    if not args.command:
        parser.print_help()
        return EXIT_SUCCESS

    # Route to appropriate command
    if args.command == "simulate":
        return simulate_command(args)
    elif args.command == "analytics":
        return results_command(args, "analytics", quantities=ANALYTICS_QUANTITIES)
    elif args.command == "forward":
        return forward_command(args)
    elif args.command == "project":
        return results_command(args, "project", quantities=["project_cir"])
    elif args.command == "validate":
        return validate_command(args)
    elif args.command == "run":
        return results_command(args, "run")
    else:
        print(f"Unknown command: {args.command}")
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
