"""
Scenario documents.

A scenario is one JSON object:

    {
      "name": "golden-scalar",
      "model": {
        "dim": 1,
        "A": [[-1.0]], "eta": [[1.0]], "Q_W": [[1.0]], "Y0": [1.0],
        "C": [[-1.0]], "Q_B": [[1.0]], "X0": [0.0],
        "unit_process": {"kind": "constant", "gamma": [1.0]},
        "filipovic": {"alpha": 0.1, "x_max": 5.0, "points": 201, "size": 6}
      },
      "grid": {"t_end": 1.0, "steps": 100},
      "mc": {"path_count": 10000, "seed": 42, "scheme": "euler"},
      "outputs": [{"quantity": "cov_Y", "args": {"t": 1.0}}]
    }

Matrices are row-major nested arrays or named factories:
{"factory": "diagonal", "values": [...]}, {"factory": "identity", "scale": s},
{"factory": "zero"}, {"factory": "shift_on_filipovic", "scale": s}.
Vectors are arrays or {"factory": "zero"} / {"factory": "basis", "index": i}.

Parsing checks structure and shapes; positivity of covariances is checked when the
model objects are built.
"""

import json
from dataclasses import dataclass, field, replace
from functools import cached_property
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Union

import numpy as np

from .errors import ConfigurationError, DimensionError, DomainError
from .filipovic import FilipovicFrame, FilipovicModel, FilipovicSpace
from .ou_engine import SCHEMES, OUSpec, TimeGrid
from .tensor_variance import UNIT_KINDS, UnitProcessSpec
from .vol_ou import XSpec

QUANTITIES = (
    "char_Y",
    "char_V",
    "cov_Y",
    "stationary_cov_Y",
    "exp_moment_bound",
    "cov_X",
    "cond_char_X",
    "forward_cov",
    "project_cir",
    "validate_all",
)

OPERATOR_FIELDS = ("A", "eta", "Q_W", "C", "Q_B")
VECTOR_FIELDS = ("Y0", "X0")
Y_FIELDS = ("A", "eta", "Q_W", "Y0")
X_FIELDS = ("C", "Q_B", "X0", "unit_process")


def _require(data: Mapping[str, Any], key: str, path: str) -> Any:
    if key not in data:
        raise ConfigurationError("missing required field", field=f"{path}.{key}" if path else key)
    return data[key]


def _as_mapping(value: Any, path: str) -> Mapping[str, Any]:
    if not isinstance(value, Mapping):
        raise ConfigurationError(f"expected an object, got {type(value).__name__}", field=path)
    return value


def _number(value: Any, path: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigurationError(f"expected a number, got {value!r}", field=path)
    return float(value)


def _integer(value: Any, path: str, minimum: int = 0) -> int:
    if isinstance(value, bool) or not isinstance(value, int) or value < minimum:
        raise ConfigurationError(f"expected an integer >= {minimum}, got {value!r}", field=path)
    return value


def parse_vector(value: Any, dim: int, path: str) -> np.ndarray:
    """Parse a vector literal or factory of length dim."""
    if isinstance(value, Mapping):
        factory = _require(value, "factory", path)
        if factory == "zero":
            return np.zeros(dim)
        if factory == "basis":
            index = _integer(_require(value, "index", path), f"{path}.index")
            if index >= dim:
                raise DimensionError(f"basis index {index} out of range for dim {dim}", field=path)
            vec = np.zeros(dim)
            vec[index] = 1.0
            return vec
        raise ConfigurationError(f"unknown vector factory '{factory}'", field=f"{path}.factory")

    if not isinstance(value, list):
        raise ConfigurationError("expected an array of numbers", field=path)
    if len(value) != dim:
        raise DimensionError(f"expected length {dim}, got {len(value)}", field=path)
    return np.array([_number(v, f"{path}[{i}]") for i, v in enumerate(value)])


def parse_matrix(
    value: Any, dim: int, path: str, frame: Optional[FilipovicFrame] = None
) -> np.ndarray:
    """Parse a dense row-major matrix or a named factory of size dim x dim."""
    if isinstance(value, Mapping):
        factory = _require(value, "factory", path)
        scale = _number(value.get("scale", 1.0), f"{path}.scale")
        if factory == "diagonal":
            return np.diag(parse_vector(_require(value, "values", path), dim, f"{path}.values"))
        if factory == "identity":
            return scale * np.eye(dim)
        if factory == "zero":
            return np.zeros((dim, dim))
        if factory == "shift_on_filipovic":
            if frame is None:
                raise ConfigurationError(
                    "shift_on_filipovic needs a model.filipovic block", field=path
                )
            return scale * frame.shift_generator()
        raise ConfigurationError(f"unknown matrix factory '{factory}'", field=f"{path}.factory")

    if not isinstance(value, list):
        raise ConfigurationError("expected a nested array or a factory object", field=path)
    if len(value) != dim:
        raise DimensionError(f"expected {dim} rows, got {len(value)}", field=path)
    rows = []
    for i, row in enumerate(value):
        if not isinstance(row, list) or len(row) != dim:
            raise DimensionError(f"expected a row of length {dim}", field=f"{path}[{i}]")
        rows.append([_number(v, f"{path}[{i}][{j}]") for j, v in enumerate(row)])
    return np.array(rows, dtype=float)


@dataclass(frozen=True)
class FilipovicSettings:
    alpha: Optional[float] = None
    x_max: Optional[float] = None
    points: Optional[int] = None
    maturities: Optional[List[float]] = None
    size: int = 6

    def build_frame(self) -> FilipovicFrame:
        space = FilipovicSpace(self.alpha, self.x_max, self.points)
        return FilipovicFrame(space, self.maturities, self.size)


@dataclass(eq=False)
class ModelSpec:
    """Parsed model parameters; operators are dense N x N arrays."""

    dim: int
    A: Optional[np.ndarray] = None
    eta: Optional[np.ndarray] = None
    Q_W: Optional[np.ndarray] = None
    Y0: Optional[np.ndarray] = None
    C: Optional[np.ndarray] = None
    Q_B: Optional[np.ndarray] = None
    X0: Optional[np.ndarray] = None
    unit_process: Optional[Dict[str, Any]] = None
    filipovic: Optional[FilipovicSettings] = None
    frame: Optional[FilipovicFrame] = None

    @property
    def has_y(self) -> bool:
        return all(getattr(self, name) is not None for name in Y_FIELDS)

    @property
    def has_x(self) -> bool:
        return all(getattr(self, name) is not None for name in X_FIELDS)

    def ou_spec(self) -> OUSpec:
        """
        Build the Y parameters.

        Raises:
            ConfigurationError: Some Y field is missing
            NotPSDError: Q_W is not symmetric PSD
        """
        for name in Y_FIELDS:
            if getattr(self, name) is None:
                raise ConfigurationError("missing required field", field=f"model.{name}")
        return OUSpec(self.A, self.eta, self.Q_W, self.Y0)

    def unit_spec(self) -> UnitProcessSpec:
        if self.unit_process is None:
            raise ConfigurationError("missing required field", field="model.unit_process")
        kind = self.unit_process["kind"]
        if kind == "constant":
            return UnitProcessSpec.constant(self.unit_process["gamma"])
        return UnitProcessSpec.normalized_Y()

    def x_spec(self) -> XSpec:
        """
        Build the X parameters (including the Y driver).

        Raises:
            ConfigurationError: Some X field is missing
            NotPSDError: Q_W or Q_B is not symmetric PSD
        """
        for name in X_FIELDS:
            if getattr(self, name) is None:
                raise ConfigurationError("missing required field", field=f"model.{name}")
        return XSpec(self.C, self.Q_B, self.X0, self.unit_spec(), self.ou_spec())

    def filipovic_model(self) -> FilipovicModel:
        if self.frame is None:
            raise ConfigurationError("missing required field", field="model.filipovic")
        return FilipovicModel(self.frame, self.x_spec())


def parse_model(data: Any) -> ModelSpec:
    """
    Parse the model block.

    Raises:
        ConfigurationError: Missing or malformed field (with its path)
    """
    data = _as_mapping(data, "model")
    settings = None
    frame = None
    if "filipovic" in data:
        block = _as_mapping(data["filipovic"], "model.filipovic")
        maturities = block.get("maturities")
        if maturities is not None:
            if not isinstance(maturities, list):
                raise ConfigurationError(
                    "expected an array of numbers", field="model.filipovic.maturities"
                )
            maturities = [
                _number(v, f"model.filipovic.maturities[{i}]") for i, v in enumerate(maturities)
            ]
        settings = FilipovicSettings(
            alpha=_number(block["alpha"], "model.filipovic.alpha") if "alpha" in block else None,
            x_max=_number(block["x_max"], "model.filipovic.x_max") if "x_max" in block else None,
            points=(
                _integer(block["points"], "model.filipovic.points", 2)
                if "points" in block
                else None
            ),
            maturities=maturities,
            size=_integer(block.get("size", 6), "model.filipovic.size", 1),
        )
        try:
            frame = settings.build_frame()
        except (ConfigurationError, DomainError) as e:
            sub = getattr(e, "field", None)
            raise ConfigurationError(
                getattr(e, "message", str(e)),
                field=f"model.filipovic.{sub}" if sub else "model.filipovic",
            ) from e

    if "dim" in data:
        dim = _integer(data["dim"], "model.dim", 1)
    elif frame is not None:
        dim = frame.dim
    else:
        raise ConfigurationError("missing required field", field="model.dim")
    if frame is not None and frame.dim != dim:
        raise DimensionError(
            f"model.dim {dim} differs from the Filipovic frame size {frame.dim}", field="model.dim"
        )

    values: Dict[str, Any] = {}
    for name in OPERATOR_FIELDS:
        if name in data:
            values[name] = parse_matrix(data[name], dim, f"model.{name}", frame)
    for name in VECTOR_FIELDS:
        if name in data:
            values[name] = parse_vector(data[name], dim, f"model.{name}")

    unit = None
    if "unit_process" in data:
        block = _as_mapping(data["unit_process"], "model.unit_process")
        kind = _require(block, "kind", "model.unit_process")
        if kind not in UNIT_KINDS:
            raise ConfigurationError(
                f"unknown unit process '{kind}'", field="model.unit_process.kind"
            )
        unit = {"kind": kind}
        if kind == "constant":
            unit["gamma"] = parse_vector(
                _require(block, "gamma", "model.unit_process"), dim, "model.unit_process.gamma"
            )

    return ModelSpec(dim=dim, unit_process=unit, filipovic=settings, frame=frame, **values)


@dataclass(frozen=True)
class MonteCarloSpec:
    path_count: int
    seed: int
    scheme: Optional[str] = None


@dataclass(frozen=True)
class OutputRequest:
    quantity: str
    args: Dict[str, Any] = field(default_factory=dict)


@dataclass(eq=False)
class ScenarioConfig:
    """A complete, validated scenario."""

    name: str
    model: ModelSpec
    grid: TimeGrid
    mc: MonteCarloSpec
    outputs: List[OutputRequest]
    source: Optional[Path] = None

    @cached_property
    def slug(self) -> str:
        return self.name.replace(" ", "-").replace("_", "-").lower()

    def with_seed(self, seed: int) -> "ScenarioConfig":
        """Copy with the Monte Carlo seed replaced."""
        return replace(self, mc=replace(self.mc, seed=int(seed)))


def parse_scenario(data: Any, source: Optional[Path] = None) -> ScenarioConfig:
    """
    Validate and convert a scenario document.

    Raises:
        ConfigurationError: Invalid document; `field` names the offending path
    """
    data = _as_mapping(data, "")
    name = data.get("name") or (source.stem if source else "scenario")
    if not isinstance(name, str):
        raise ConfigurationError("expected a string", field="name")

    model = parse_model(_require(data, "model", ""))

    grid_block = _as_mapping(_require(data, "grid", ""), "grid")
    t_end = _number(_require(grid_block, "t_end", "grid"), "grid.t_end")
    steps = _integer(_require(grid_block, "steps", "grid"), "grid.steps", 1)
    try:
        grid = TimeGrid(t_end, steps)
    except ConfigurationError as e:
        raise ConfigurationError(
            e.message, field=f"grid.{e.field}" if e.field else "grid"
        ) from e

    mc_block = _as_mapping(_require(data, "mc", ""), "mc")
    scheme = mc_block.get("scheme")
    if scheme is not None and scheme not in SCHEMES:
        raise ConfigurationError(f"unknown scheme '{scheme}'", field="mc.scheme")
    mc = MonteCarloSpec(
        path_count=_integer(_require(mc_block, "path_count", "mc"), "mc.path_count", 1),
        seed=_integer(_require(mc_block, "seed", "mc"), "mc.seed"),
        scheme=scheme,
    )

    outputs_raw = data.get("outputs", [])
    if not isinstance(outputs_raw, list):
        raise ConfigurationError("expected an array", field="outputs")
    outputs = []
    for i, item in enumerate(outputs_raw):
        item = _as_mapping(item, f"outputs[{i}]")
        quantity = _require(item, "quantity", f"outputs[{i}]")
        if quantity not in QUANTITIES:
            raise ConfigurationError(
                f"unknown quantity '{quantity}'", field=f"outputs[{i}].quantity"
            )
        args = _as_mapping(item.get("args", {}), f"outputs[{i}].args")
        outputs.append(OutputRequest(quantity, dict(args)))

    return ScenarioConfig(name=name, model=model, grid=grid, mc=mc, outputs=outputs, source=source)


def load_scenario(path: Union[str, Path]) -> ScenarioConfig:
    """
    Read and parse a scenario JSON file.

    Raises:
        ConfigurationError: Missing file, invalid JSON or invalid document
    """
    path = Path(path)
    if not path.exists():
        raise ConfigurationError(f"scenario file not found: {path}", field="config")
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = json.load(f)
    except json.JSONDecodeError as e:
        raise ConfigurationError(f"invalid JSON: {e}", field="config") from e
    return parse_scenario(data, source=path)
