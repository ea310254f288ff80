"""Integration tests for the command-line interface."""

import copy
import json

import pandas as pd
import pytest

from cli.main import EXIT_CONFIG_ERROR, EXIT_FAILURE, EXIT_SUCCESS, main
from tests.conftest import SCENARIO_DIR


def small_mc(data, path_count=20, steps=10):
    data = copy.deepcopy(data)
    data["mc"]["path_count"] = path_count
    data["grid"]["steps"] = steps
    return data


@pytest.fixture
def filipovic_data():
    """The Filipovic scenario document."""
    with open(SCENARIO_DIR / "filipovic_forward.json", "r", encoding="utf-8") as f:
        return json.load(f)


@pytest.mark.integration
class TestRunCommand:
    """tensorheston run."""

    def test_run_writes_results(self, isolated_output, scenario_file):
        """Test a clean run exits 0 and writes results.json."""
        out = isolated_output / "out"
        assert main(["run", "--config", str(scenario_file()), "--out", str(out)]) == EXIT_SUCCESS

        results = json.loads((out / "results.json").read_text(encoding="utf-8"))
        assert results["scenario"] == "golden-scalar"
        assert [r["name"] for r in results["records"]][:2] == ["cov_Y", "cov_X"]
        assert results["records"][0]["value"][0][0] == pytest.approx(0.432332, abs=1e-6)

    def test_default_output_dir(self, isolated_output, scenario_file, monkeypatch):
        """Test that results go under Paths.output_dir/<slug> without --out."""
        monkeypatch.setenv("TENSORHESTON_PATHS_OUTPUT_DIR", str(isolated_output / "outputs"))
        assert main(["run", "-c", str(scenario_file())]) == EXIT_SUCCESS
        assert (isolated_output / "outputs" / "golden-scalar" / "results.json").exists()

    def test_failed_quantity_exits_one(self, isolated_output, scenario_file, golden_scenario_data):
        """Test that a failed record gives exit 1 and is still written."""
        data = copy.deepcopy(golden_scenario_data)
        data["outputs"] = [{"quantity": "char_V", "args": {"f": [1.0], "g": [1.0]}}]
        out = isolated_output / "out"

        assert main(["run", "-c", str(scenario_file(data)), "-o", str(out)]) == EXIT_FAILURE

        record = json.loads((out / "results.json").read_text(encoding="utf-8"))["records"][0]
        assert record["error"].startswith("UnsupportedConfigurationError")
        assert record["value"] is None

    def test_seed_override_is_reproducible(
        self, isolated_output, scenario_file, golden_scenario_data
    ):
        """Test that equal seeds give identical files and another seed differs."""
        data = copy.deepcopy(golden_scenario_data)
        data["outputs"] = [
            {"quantity": "char_Y", "args": {"f": [1.0], "compare_mc": True, "path_count": 500}}
        ]
        path = str(scenario_file(data))

        def results(out, seed):
            argv = ["run", "-c", path, "-o", str(isolated_output / out), "--seed-override", seed]
            assert main(argv) == EXIT_SUCCESS
            return (isolated_output / out / "results.json").read_bytes()

        assert results("a", "5") == results("b", "5")
        assert results("a", "5") != results("c", "6")


@pytest.mark.integration
class TestConfigurationErrors:
    """Exit code 2 for invalid input."""

    def test_missing_file(self, isolated_output, capsys):
        """Test a scenario path that does not exist."""
        assert main(["run", "-c", str(isolated_output / "none.json")]) == EXIT_CONFIG_ERROR
        assert "Configuration error" in capsys.readouterr().err

    def test_invalid_json(self, isolated_output):
        """Test a file that is not JSON."""
        path = isolated_output / "bad.json"
        path.write_text("not json", encoding="utf-8")
        assert main(["analytics", "-c", str(path)]) == EXIT_CONFIG_ERROR

    def test_invalid_field(self, isolated_output, scenario_file, golden_scenario_data):
        """Test a document with an invalid grid."""
        data = copy.deepcopy(golden_scenario_data)
        data["grid"]["steps"] = -1
        assert main(["run", "-c", str(scenario_file(data))]) == EXIT_CONFIG_ERROR

    def test_bad_output_arguments(self, isolated_output, scenario_file, golden_scenario_data):
        """Test that malformed output arguments abort the run."""
        data = copy.deepcopy(golden_scenario_data)
        data["outputs"] = [{"quantity": "char_Y", "args": {"f": [1.0, 2.0]}}]
        out = isolated_output / "out"
        assert main(["run", "-c", str(scenario_file(data)), "-o", str(out)]) == EXIT_CONFIG_ERROR
        assert not (out / "results.json").exists()

    def test_no_command(self, capsys):
        """Test that no subcommand prints help."""
        assert main([]) == EXIT_SUCCESS
        assert "usage" in capsys.readouterr().out


@pytest.mark.integration
class TestSubcommands:
    """simulate, analytics, project and forward."""

    def test_simulate_all_steps(self, isolated_output, scenario_file, golden_scenario_data):
        """Test that every recorded step of Y and X is written."""
        out = isolated_output / "sim"
        path = scenario_file(small_mc(golden_scenario_data))
        assert main(["simulate", "-c", str(path), "-o", str(out)]) == EXIT_SUCCESS

        frame = pd.read_csv(out / "paths_Y.csv")
        assert list(frame.columns) == ["path", "step", "t", "y"]
        assert len(frame) == 20 * 11
        assert (out / "paths_X.csv").exists()

    def test_simulate_terminal_only(self, isolated_output, scenario_file, golden_scenario_data):
        """Test that --terminal-only keeps one row per path."""
        out = isolated_output / "sim"
        path = scenario_file(small_mc(golden_scenario_data))
        argv = ["simulate", "-c", str(path), "-o", str(out), "--terminal-only"]
        assert main(argv) == EXIT_SUCCESS

        frame = pd.read_csv(out / "paths_X.csv")
        assert len(frame) == 20
        assert set(frame["step"]) == {10}

    def test_analytics_selects_laws(self, isolated_output, scenario_file):
        """Test that analytics skips the projection outputs."""
        out = isolated_output / "an"
        assert main(["analytics", "-c", str(scenario_file()), "-o", str(out)]) == EXIT_SUCCESS
        records = json.loads((out / "results.json").read_text(encoding="utf-8"))["records"]
        names = [r["name"] for r in records]
        assert "project_cir" not in names
        assert "char_Y" in names

    def test_project(self, isolated_output, scenario_file):
        """Test the CIR projection subcommand."""
        out = isolated_output / "pr"
        assert main(["project", "-c", str(scenario_file()), "-o", str(out)]) == EXIT_SUCCESS
        records = json.loads((out / "results.json").read_text(encoding="utf-8"))["records"]
        assert [r["name"] for r in records] == ["project_cir"]
        assert records[0]["value"]["params"]["kappa"] == pytest.approx(-2.0)

    def test_forward_with_curve(self, isolated_output, scenario_file, filipovic_data):
        """Test forward covariances with an initial curve read from CSV."""
        curve = isolated_output / "curve.csv"
        pd.DataFrame(
            {"maturity": [0.0, 1.0, 2.0, 5.0], "forward_value": [0.01, 0.015, 0.02, 0.025]}
        ).to_csv(curve, index=False)
        out = isolated_output / "fw"
        path = scenario_file(small_mc(filipovic_data, path_count=50, steps=20))

        argv = ["forward", "-c", str(path), "-o", str(out), "--curve", str(curve)]
        assert main(argv) == EXIT_SUCCESS

        expected = pd.read_csv(out / "forward_curve.csv")
        assert list(expected.columns) == ["maturity", "forward_value"]
        records = json.loads((out / "results.json").read_text(encoding="utf-8"))["records"]
        assert [r["name"] for r in records] == ["forward_cov", "forward_cov"]
        assert all(r["path_count"] == 50 for r in records)


@pytest.mark.integration
class TestValidateCommand:
    """tensorheston validate."""

    def test_broken_model_exits_one(self, isolated_output, scenario_file, golden_scenario_data):
        """Test that a model failing to build gives exit 1 and a report."""
        data = copy.deepcopy(golden_scenario_data)
        data["model"]["Q_W"] = [[-1.0]]
        out = isolated_output / "val"

        assert main(["validate", "-c", str(scenario_file(data)), "-o", str(out)]) == EXIT_FAILURE

        report = json.loads((out / "validation.json").read_text(encoding="utf-8"))
        assert report["passed"] is False
        assert report["dim"] is None
        assert [c["name"] for c in report["checks"]] == ["model_build"]

    def test_seed_override_with_scenario(
        self, isolated_output, scenario_file, golden_scenario_data
    ):
        """Test that --seed-override replaces the scenario seed in the report."""
        data = copy.deepcopy(golden_scenario_data)
        data["model"]["Q_W"] = [[-1.0]]
        out = isolated_output / "val"
        args = ["validate", "-c", str(scenario_file(data)), "-o", str(out), "--seed-override", "7"]

        assert main(args) == EXIT_FAILURE
        report = json.loads((out / "validation.json").read_text(encoding="utf-8"))
        assert report["seed"] == 7

    @pytest.mark.slow
    def test_seed_override_without_scenario(self, isolated_output, monkeypatch):
        """Test that --seed-override selects the seed of the default model."""
        monkeypatch.setenv("TENSORHESTON_VALIDATION_EXACT_SAMPLES", "2000")
        out = isolated_output / "val"
        args = ["validate", "-o", str(out), "--dim", "2", "--path-count", "500"]

        main(args + ["--seed-override", "7"])
        report = json.loads((out / "validation.json").read_text(encoding="utf-8"))
        assert report["seed"] == 7
        assert report["dim"] == 2

    @pytest.mark.slow
    def test_default_suite(self, isolated_output):
        """Test the suite on the default random model."""
        out = isolated_output / "val"
        assert main(["validate", "-o", str(out)]) == EXIT_SUCCESS
        report = json.loads((out / "validation.json").read_text(encoding="utf-8"))
        assert report["passed"] is True
        assert report["dim"] == 4
