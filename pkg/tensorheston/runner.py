"""
Scenario orchestration.

Every requested output is dispatched to a quantity handler. A numerical failure in one
quantity becomes an `error` entry on its record and the run continues; a malformed
argument is a configuration error and aborts the run.
"""

import math
import time
from dataclasses import dataclass
from functools import cached_property
from typing import Any, Callable, Dict, Iterable, List, Optional

import numpy as np

from config.settings import get_config

from .errors import ConfigurationError, HestonError
from .exporters import to_jsonable
from .filipovic import FilipovicModel, forward_cov
from .gaussian_analytics import CharValue, char_V, char_Y, exp_moment_bound
from .logger import HestonLogger, get_logger
from .ou_engine import OUSpec, TimeGrid, cov_Y, sample_Y_exact, stationary_cov_Y
from .projection import cir_mean, cir_params, cir_stationary_mean, simulate_V_proj
from .scenario import ScenarioConfig, parse_vector
from .validation import validate_all
from .vol_ou import XSpec, cond_char_X, cov_X, simulate_X_paths


@dataclass
class ResultRecord:
    """One computed quantity with its provenance."""

    name: str
    args: Dict[str, Any]
    value: Any
    stderr: Any
    provenance: str
    wall_ms: Optional[float] = None
    path_count: Optional[int] = None
    error: Optional[str] = None

    def to_dict(self) -> dict:
        data = {
            "name": self.name,
            "args": to_jsonable(self.args),
            "value": to_jsonable(self.value),
            "stderr": to_jsonable(self.stderr),
            "provenance": self.provenance,
            "wall_ms": self.wall_ms,
        }
        if self.path_count is not None:
            data["path_count"] = self.path_count
        if self.error is not None:
            data["error"] = self.error
        return data


@dataclass
class Outcome:
    value: Any
    stderr: Any = None
    provenance: str = "closed_form"
    path_count: Optional[int] = None
    error: Optional[str] = None


class ScenarioModels:
    """Model objects of a scenario, built on first use and shared by its outputs."""

    def __init__(self, config: ScenarioConfig):
        self.config = config

    @cached_property
    def ou(self) -> OUSpec:
        return self.config.model.ou_spec()

    @cached_property
    def xspec(self) -> XSpec:
        return self.config.model.x_spec()

    @cached_property
    def filipovic(self) -> FilipovicModel:
        return self.config.model.filipovic_model()


class RunContext:
    """Argument parsing and model access for one output request."""

    def __init__(
        self, config: ScenarioConfig, index: int, threads: Optional[int], models: ScenarioModels
    ):
        self.config = config
        self.index = index
        self.threads = threads
        self.models = models

    @property
    def seed(self) -> int:
        return self.config.mc.seed

    @property
    def dim(self) -> int:
        return self.config.model.dim

    @property
    def ou(self) -> OUSpec:
        return self.models.ou

    @property
    def xspec(self) -> XSpec:
        return self.models.xspec

    @property
    def filipovic(self) -> FilipovicModel:
        return self.models.filipovic

    def field(self, key: str) -> str:
        return f"outputs[{self.index}].args.{key}"

    def number(self, args: Dict[str, Any], key: str, default: Optional[float] = None) -> float:
        value = args.get(key, default)
        if value is None:
            raise ConfigurationError("missing required argument", field=self.field(key))
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigurationError(f"expected a number, got {value!r}", field=self.field(key))
        return float(value)

    def integer(self, args: Dict[str, Any], key: str, default: Optional[int] = None) -> int:
        value = args.get(key, default)
        if isinstance(value, bool) or not isinstance(value, int) or value < 1:
            raise ConfigurationError(
                f"expected a positive integer, got {value!r}", field=self.field(key)
            )
        return value

    def time(self, args: Dict[str, Any]) -> float:
        return self.number(args, "t", self.config.grid.t_end)

    def vector(self, args: Dict[str, Any], key: str) -> np.ndarray:
        if key not in args:
            raise ConfigurationError("missing required argument", field=self.field(key))
        return parse_vector(args[key], self.dim, self.field(key))

    def path_count(self, args: Dict[str, Any]) -> int:
        return self.integer(args, "path_count", self.config.mc.path_count)

    def steps(self, args: Dict[str, Any]) -> Optional[int]:
        return self.integer(args, "steps") if "steps" in args else None

    def compare_mc(self, args: Dict[str, Any]) -> bool:
        return bool(args.get("compare_mc", False))


def _char_stderr(value: CharValue) -> Dict[str, float]:
    return {"re": value.stderr_re, "im": value.stderr_im}


def _sample_cov(samples: np.ndarray):
    n = samples.shape[0]
    centered = samples - samples.mean(axis=0)
    products = centered[:, :, None] * centered[:, None, :]
    return products.sum(axis=0) / max(n - 1, 1), products.std(axis=0) / math.sqrt(n)


def quantity_char_Y(run: RunContext, args: Dict[str, Any]) -> Outcome:
    t, f = run.time(args), run.vector(args, "f")
    exact = char_Y(run.ou, t, f)
    if not run.compare_mc(args):
        return Outcome(exact.to_dict())
    count = run.path_count(args)
    estimate = CharValue.from_samples(sample_Y_exact(run.ou, t, count, run.seed) @ f)
    value = {"closed_form": exact.to_dict(), "mc_estimate": estimate.to_dict()}
    return Outcome(value, _char_stderr(estimate), "both", count)


def quantity_char_V(run: RunContext, args: Dict[str, Any]) -> Outcome:
    t, f, g = run.time(args), run.vector(args, "f"), run.vector(args, "g")
    exact = char_V(run.ou, t, f, g)
    if not run.compare_mc(args):
        return Outcome(exact.to_dict())
    count = run.path_count(args)
    samples = sample_Y_exact(run.ou, t, count, run.seed)
    estimate = CharValue.from_samples((samples @ f) * (samples @ g))
    value = {"closed_form": exact.to_dict(), "mc_estimate": estimate.to_dict()}
    return Outcome(value, _char_stderr(estimate), "both", count)


def quantity_cov_Y(run: RunContext, args: Dict[str, Any]) -> Outcome:
    quad_steps = run.integer(args, "quad_steps") if "quad_steps" in args else None
    return Outcome(cov_Y(run.ou, run.time(args), quad_steps=quad_steps))


def quantity_stationary_cov_Y(run: RunContext, args: Dict[str, Any]) -> Outcome:
    return Outcome(stationary_cov_Y(run.ou))


def quantity_exp_moment_bound(run: RunContext, args: Dict[str, Any]) -> Outcome:
    bound = exp_moment_bound(run.ou, run.time(args), run.number(args, "theta"))
    return Outcome({"bound": bound.value, "k": bound.k})


def quantity_cov_X(run: RunContext, args: Dict[str, Any]) -> Outcome:
    t = run.time(args)
    exact = cov_X(run.xspec, t)
    if not run.compare_mc(args):
        return Outcome(exact)
    count = run.path_count(args)
    grid = TimeGrid(t, run.steps(args)) if "steps" in args else TimeGrid.covering(t)
    ensemble = simulate_X_paths(
        run.xspec,
        grid,
        count,
        run.seed,
        scheme=run.config.mc.scheme,
        record="terminal",
        threads=run.threads,
    )
    estimate, stderr = _sample_cov(ensemble.terminal("X"))
    return Outcome({"closed_form": exact, "mc_estimate": estimate}, stderr, "both", count)


def quantity_cond_char_X(run: RunContext, args: Dict[str, Any]) -> Outcome:
    count = run.path_count(args)
    value = cond_char_X(
        run.xspec,
        run.time(args),
        run.vector(args, "f"),
        count,
        run.seed,
        steps=run.steps(args),
        scheme=run.config.mc.scheme,
        threads=run.threads,
    )
    return Outcome(value.to_dict(), _char_stderr(value), "mc", count)


def quantity_forward_cov(run: RunContext, args: Dict[str, Any]) -> Outcome:
    count = run.path_count(args)
    result = forward_cov(
        run.filipovic,
        run.time(args),
        run.number(args, "x"),
        run.number(args, "y"),
        count,
        run.seed,
        steps=run.steps(args),
        scheme=run.config.mc.scheme,
        threads=run.threads,
    )
    value = {"mc_estimate": result.mc_estimate, "closed_form": result.closed_form}
    provenance = "both" if result.closed_form is not None else "mc"
    return Outcome(value, result.stderr, provenance, count)


def quantity_project_cir(run: RunContext, args: Dict[str, Any]) -> Outcome:
    t, f = run.time(args), run.vector(args, "f")
    if "lam" in args:
        lam = run.number(args, "lam")
    else:
        lam = float(f @ run.ou.A.T @ f) / float(f @ f)
    params = cir_params(run.ou, f, lam)
    value: Dict[str, Any] = {"params": params.to_dict(), "lam": lam, "mean": cir_mean(params, t)}
    if params.kappa < 0:
        value["stationary_mean"] = cir_stationary_mean(params)
    if not run.compare_mc(args):
        return Outcome(value)

    count = run.path_count(args)
    grid = TimeGrid(t, run.steps(args)) if "steps" in args else TimeGrid.covering(t)
    ensemble = simulate_V_proj(
        run.ou, f, grid, count, run.seed, record="terminal", threads=run.threads
    )
    terminal = ensemble.terminal("v")
    value["mc_mean"] = float(terminal.mean())
    stderr = float(terminal.std(ddof=1) / math.sqrt(count)) if count > 1 else 0.0
    return Outcome(value, stderr, "both", count)


def quantity_validate_all(run: RunContext, args: Dict[str, Any]) -> Outcome:
    model = run.config.model
    report = validate_all(
        run.config if model.has_y else None,
        dim=model.dim,
        path_count=run.integer(args, "path_count") if "path_count" in args else None,
        exact_samples=run.integer(args, "exact_samples") if "exact_samples" in args else None,
        threads=run.threads,
    )
    error = None
    if not report.passed:
        error = "validation failed: " + ", ".join(report.failed_checks)
    return Outcome(report.to_dict(), None, "both", report.path_count, error)


QUANTITY_HANDLERS: Dict[str, Callable[[RunContext, Dict[str, Any]], Outcome]] = {
    "char_Y": quantity_char_Y,
    "char_V": quantity_char_V,
    "cov_Y": quantity_cov_Y,
    "stationary_cov_Y": quantity_stationary_cov_Y,
    "exp_moment_bound": quantity_exp_moment_bound,
    "cov_X": quantity_cov_X,
    "cond_char_X": quantity_cond_char_X,
    "forward_cov": quantity_forward_cov,
    "project_cir": quantity_project_cir,
    "validate_all": quantity_validate_all,
}


def run_scenario(
    config: ScenarioConfig,
    threads: Optional[int] = None,
    logger: Optional[HestonLogger] = None,
    include_wall_time: Optional[bool] = None,
    quantities: Optional[Iterable[str]] = None,
) -> List[ResultRecord]:
    """
    Compute every requested output of a scenario.

    Args:
        config: Parsed scenario
        threads: Worker threads for Monte Carlo work
        logger: Logger instance
        include_wall_time: Keep measured wall times (defaults to Output.include_wall_time)
        quantities: Only run outputs whose quantity is in this set

    Returns:
        Result records in output order

    Raises:
        ConfigurationError: An output has malformed arguments
    """
    if include_wall_time is None:
        include_wall_time = get_config().get_bool("Output", "include_wall_time", fallback=False)
    logger = logger or get_logger(__name__)
    selected = set(quantities) if quantities is not None else None
    records: List[ResultRecord] = []
    started = time.time()
    logger.log_start("run_scenario", scenario=config.name, outputs=len(config.outputs))

    models = ScenarioModels(config)
    for index, request in enumerate(config.outputs):
        if selected is not None and request.quantity not in selected:
            continue
        run = RunContext(config, index, threads, models)

        record_start = time.perf_counter()
        try:
            outcome = QUANTITY_HANDLERS[request.quantity](run, request.args)
        except ConfigurationError:
            raise
        except HestonError as e:
            logger.warning(
                f"Quantity failed: {request.quantity}",
                quantity=request.quantity,
                error_type=type(e).__name__,
                error=str(e),
            )
            outcome = Outcome(None, None, "closed_form", error=f"{type(e).__name__}: {e}")
        elapsed_ms = (time.perf_counter() - record_start) * 1000.0

        records.append(
            ResultRecord(
                name=request.quantity,
                args=request.args,
                value=outcome.value,
                stderr=outcome.stderr,
                provenance=outcome.provenance,
                wall_ms=round(elapsed_ms, 3) if include_wall_time else None,
                path_count=outcome.path_count,
                error=outcome.error,
            )
        )
        logger.debug(
            f"Computed {request.quantity}",
            quantity=request.quantity,
            provenance=outcome.provenance,
            path_count=outcome.path_count,
            duration_ms=round(elapsed_ms, 3),
        )

    failed = sum(1 for record in records if record.error is not None)
    logger.log_complete(
        "run_scenario",
        duration=time.time() - started,
        records=len(records),
        failed=failed,
    )
    return records
