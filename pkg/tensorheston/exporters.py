"""Write run artifacts: results.json, path CSVs and validation.json."""

import dataclasses
import json
import math
from pathlib import Path
from typing import TYPE_CHECKING, Any, Dict, List, Optional, Sequence

import numpy as np
import pandas as pd

if TYPE_CHECKING:
    from tensorheston.logger import HestonLogger
    from tensorheston.ou_engine import PathEnsemble

PATH_FIELDS = {"Y": "y", "X": "x", "v": "v", "v_identity": "v_identity"}


def to_jsonable(value: Any) -> Any:
    """
    Convert numpy values, complex numbers and result objects to plain JSON types.

    Non-finite floats become the strings "inf", "-inf" and "nan".
    """
    if hasattr(value, "to_dict"):
        return to_jsonable(value.to_dict())
    if dataclasses.is_dataclass(value) and not isinstance(value, type):
        return to_jsonable(dataclasses.asdict(value))
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return to_jsonable(value.tolist())
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (complex, np.complexfloating)):
        return {"re": to_jsonable(float(value.real)), "im": to_jsonable(float(value.imag))}
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return value
    if isinstance(value, Path):
        return str(value)
    return value


def _write_json(data: Any, output_path: Path) -> None:
    output_path.parent.mkdir(parents=True, exist_ok=True)
    with open(output_path, "w", encoding="utf-8", newline="\n") as f:
        json.dump(to_jsonable(data), f, indent=2, ensure_ascii=False)
        f.write("\n")


def export_results_json(
    records: Sequence[Any],
    output_path: Path,
    scenario: Optional[str] = None,
    logger: Optional["HestonLogger"] = None,
) -> None:
    """Export result records as a JSON document."""
    output_path = Path(output_path)
    if logger:
        logger.debug(f"Exporting results: {output_path}", record_count=len(records))

    _write_json({"scenario": scenario, "records": list(records)}, output_path)

    if logger:
        logger.debug("Results export complete", output_file=str(output_path))


def paths_frame(ensemble: "PathEnsemble", name: str = "Y") -> pd.DataFrame:
    """
    One row per (path, recorded step) with columns path, step, t and the state components.

    Args:
        ensemble: Simulated paths
        name: Field of the ensemble (Y, X, v or v_identity)
    """
    if name not in PATH_FIELDS:
        raise ValueError(f"Unknown path field: {name}")
    data = getattr(ensemble, name)
    if data is None:
        raise ValueError(f"Ensemble has no '{name}' paths")

    count, records = data.shape[:2]
    values = data.reshape(count * records, -1)
    prefix = PATH_FIELDS[name]
    if values.shape[1] == 1:
        columns = [prefix]
    else:
        columns = [f"{prefix}_{i}" for i in range(values.shape[1])]

    frame = pd.DataFrame(values, columns=columns)
    frame.insert(0, "t", np.tile(ensemble.recorded_times, count))
    frame.insert(0, "step", np.tile(ensemble.recorded_steps, count))
    frame.insert(0, "path", np.repeat(np.arange(count), records))
    return frame


def export_paths_csv(
    ensemble: "PathEnsemble",
    output_path: Path,
    name: str = "Y",
    logger: Optional["HestonLogger"] = None,
) -> None:
    """Export one ensemble field as CSV."""
    output_path = Path(output_path)
    output_path.parent.mkdir(parents=True, exist_ok=True)
    frame = paths_frame(ensemble, name)

    if logger:
        logger.debug(
            f"Exporting paths to CSV: {output_path}",
            field=name,
            path_count=ensemble.path_count,
            rows=len(frame),
        )

    frame.to_csv(output_path, index=False, lineterminator="\n", encoding="utf-8")


def export_validation_json(
    report: Any,
    output_path: Path,
    logger: Optional["HestonLogger"] = None,
) -> None:
    """Export a validation report as JSON."""
    output_path = Path(output_path)
    if logger:
        logger.debug(f"Exporting validation report: {output_path}")
    _write_json(report, output_path)


def export_all(
    output_dir: Path,
    records: Optional[Sequence[Any]] = None,
    ensemble: Optional["PathEnsemble"] = None,
    report: Any = None,
    scenario: Optional[str] = None,
    path_fields: Optional[List[str]] = None,
    logger: Optional["HestonLogger"] = None,
) -> Dict[str, Path]:
    """
    Export every artifact that was produced by a run.

    Args:
        output_dir: Output directory
        records: Result records (results.json)
        ensemble: Simulated paths (paths_<field>.csv)
        report: Validation report (validation.json)
        scenario: Scenario name written into results.json
        path_fields: Ensemble fields to export; defaults to every populated field

    Returns:
        Mapping of artifact name to written path
    """
    output_dir = Path(output_dir)
    output_dir.mkdir(parents=True, exist_ok=True)
    output_files: Dict[str, Path] = {}

    if records is not None:
        path = output_dir / "results.json"
        export_results_json(records, path, scenario=scenario, logger=logger)
        output_files["results"] = path

    if ensemble is not None:
        if path_fields is None:
            path_fields = [name for name in PATH_FIELDS if getattr(ensemble, name) is not None]
        for name in path_fields:
            path = output_dir / f"paths_{name}.csv"
            export_paths_csv(ensemble, path, name=name, logger=logger)
            output_files[f"paths_{name}"] = path

    if report is not None:
        path = output_dir / "validation.json"
        export_validation_json(report, path, logger=logger)
        output_files["validation"] = path

    if logger:
        logger.info(
            f"Export complete: {len(output_files)} files created",
            output_count=len(output_files),
        )

    return output_files
