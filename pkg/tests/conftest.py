"""Pytest configuration and shared fixtures."""

import copy
import json
import tempfile
from pathlib import Path
from typing import Generator

import numpy as np
import pytest

from tensorheston.ou_engine import OUSpec
from tensorheston.tensor_variance import UnitProcessSpec
from tensorheston.vol_ou import XSpec

SCENARIO_DIR = Path(__file__).parent.parent / "config" / "scenarios"


@pytest.fixture
def temp_dir() -> Generator[Path, None, None]:
    """Create a temporary directory for test files."""
    with tempfile.TemporaryDirectory() as tmpdir:
        yield Path(tmpdir)


@pytest.fixture
def isolated_output(temp_dir: Path, monkeypatch) -> Path:
    """Run from a temporary directory so default output and log paths stay inside it."""
    monkeypatch.chdir(temp_dir)
    monkeypatch.setenv("TENSORHESTON_LOGGING_LOG_DIR", str(temp_dir / "logs" / "{slug}"))
    monkeypatch.setenv("TENSORHESTON_LOGGING_CONSOLE_OUTPUT", "false")
    return temp_dir


@pytest.fixture
def scalar_spec() -> OUSpec:
    """N=1, A=-1, eta=1, Q_W=1, Y0=0."""
    return OUSpec(A=[[-1.0]], eta=[[1.0]], Q_W=[[1.0]], Y0=[0.0])


@pytest.fixture
def golden_xspec() -> XSpec:
    """Scalar X model with A=C=-1, unit noise, gamma=1, Y0=1 and X0=0."""
    ou = OUSpec(A=[[-1.0]], eta=[[1.0]], Q_W=[[1.0]], Y0=[1.0])
    return XSpec(
        C=[[-1.0]], Q_B=[[1.0]], X0=[0.0], unit_process=UnitProcessSpec.constant([1.0]), ou=ou
    )


@pytest.fixture
def diagonal_spec() -> OUSpec:
    """Three decoupled factors with distinct rates."""
    return OUSpec(
        A=np.diag([-0.5, -1.0, -2.0]),
        eta=np.diag([1.0, 0.8, 0.5]),
        Q_W=np.diag([1.0, 0.5, 0.25]),
        Y0=[0.4, -0.2, 0.1],
    )


@pytest.fixture
def coupled_spec() -> OUSpec:
    """Stable non-normal generator with correlated noise."""
    return OUSpec(
        A=[[-1.0, 0.3, 0.0], [0.0, -1.5, 0.2], [0.1, 0.0, -0.8]],
        eta=np.eye(3),
        Q_W=[[1.0, 0.2, 0.0], [0.2, 0.5, 0.1], [0.0, 0.1, 0.3]],
        Y0=[0.3, 0.1, -0.2],
    )


@pytest.fixture
def golden_scenario_data() -> dict:
    """The golden scalar scenario document."""
    with open(SCENARIO_DIR / "golden_scalar.json", "r", encoding="utf-8") as f:
        return json.load(f)


@pytest.fixture
def scenario_file(temp_dir: Path, golden_scenario_data: dict):
    """Factory writing a (possibly modified) scenario document to disk."""

    def write(data: dict = None, name: str = "scenario.json") -> Path:
        document = copy.deepcopy(golden_scenario_data if data is None else data)
        path = temp_dir / name
        path.write_text(json.dumps(document), encoding="utf-8")
        return path

    return write
