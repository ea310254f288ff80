"""Unit tests for configuration system."""

import os
import tempfile
from pathlib import Path

import pytest

from config.settings import HestonConfig, create_default_config, get_config


class TestHestonConfig:
    """Test configuration loading and access."""

    def test_load_defaults_when_no_file(self):
        """Test that defaults are loaded when no config file exists."""
        with tempfile.TemporaryDirectory() as tmpdir:
            config_path = os.path.join(tmpdir, "nonexistent.ini")
            config = HestonConfig(config_path)

            assert config.get("Simulation", "scheme") == "euler"
            assert config.get("Paths", "output_dir") == "data/outputs"

    def test_load_from_file(self):
        """Test loading configuration from file."""
        with tempfile.NamedTemporaryFile(mode="w", suffix=".ini", delete=False) as f:
            f.write("[Simulation]\n")
            f.write("scheme = exact\n")
            f.write("[Paths]\n")
            f.write("output_dir = /custom/path\n")
            config_path = f.name

        try:
            config = HestonConfig(config_path)
            assert config.get("Simulation", "scheme") == "exact"
            assert config.get("Paths", "output_dir") == "/custom/path"
        finally:
            os.unlink(config_path)

    def test_partial_file_keeps_other_defaults(self):
        """Test that a file naming one key leaves the remaining defaults in place."""
        with tempfile.NamedTemporaryFile(mode="w", suffix=".ini", delete=False) as f:
            f.write("[Numerics]\n")
            f.write("tol_psd = 1e-8\n")
            config_path = f.name

        try:
            config = HestonConfig(config_path)
            assert config.get_float("Numerics", "tol_psd") == 1e-8
            assert config.get_float("Numerics", "unit_tol") == 1e-12
            assert config.get_int("Filipovic", "points") == 201
        finally:
            os.unlink(config_path)

    def test_env_var_override(self):
        """Test that environment variables override config file."""
        with tempfile.NamedTemporaryFile(mode="w", suffix=".ini", delete=False) as f:
            f.write("[Simulation]\n")
            f.write("threads = 1\n")
            config_path = f.name

        try:
            os.environ["TENSORHESTON_SIMULATION_THREADS"] = "4"
            config = HestonConfig(config_path)

            assert config.get_int("Simulation", "threads") == 4
        finally:
            del os.environ["TENSORHESTON_SIMULATION_THREADS"]
            os.unlink(config_path)

    def test_get_int(self):
        """Test getting integer values."""
        config = HestonConfig()
        steps = config.get_int("Simulation", "steps_per_unit")
        assert isinstance(steps, int)
        assert steps == 100

    def test_get_float(self):
        """Test getting float values."""
        config = HestonConfig()
        alpha = config.get_float("Filipovic", "alpha")
        assert isinstance(alpha, float)
        assert alpha == 0.1

    def test_get_float_invalid_falls_back(self, monkeypatch):
        """Test that an unparsable value yields the fallback."""
        monkeypatch.setenv("TENSORHESTON_FILIPOVIC_ALPHA", "not-a-number")
        config = HestonConfig()
        assert config.get_float("Filipovic", "alpha", fallback=0.25) == 0.25

    def test_get_bool(self):
        """Test getting boolean values."""
        config = HestonConfig()
        assert config.get_bool("Logging", "console_output") is True
        assert config.get_bool("Output", "include_wall_time") is False

    def test_get_list(self, monkeypatch):
        """Test getting list values."""
        monkeypatch.setenv("TENSORHESTON_VALIDATION_SEEDS", "1, 2,3")
        config = HestonConfig()
        assert config.get_list("Validation", "seeds") == ["1", "2", "3"]

    def test_get_path(self):
        """Test getting path values."""
        config = HestonConfig()
        output_dir = config.get_path("Paths", "output_dir")
        assert isinstance(output_dir, Path)
        assert output_dir.is_absolute()

    def test_get_path_create(self):
        """Test creating directory when getting path."""
        with tempfile.TemporaryDirectory() as tmpdir:
            config = HestonConfig()
            config.set("Paths", "test_dir", os.path.join(tmpdir, "new_dir"))

            new_path = config.get_path("Paths", "test_dir", create=True)
            assert new_path.exists()
            assert new_path.is_dir()

    def test_set_and_save(self):
        """Test setting values and saving to file."""
        with tempfile.NamedTemporaryFile(mode="w", suffix=".ini", delete=False) as f:
            config_path = f.name

        try:
            config = HestonConfig()
            config.set("Validation", "dim", "6")
            config.save(config_path)

            # Load again and verify
            config2 = HestonConfig(config_path)
            assert config2.get_int("Validation", "dim") == 6
        finally:
            if os.path.exists(config_path):
                os.unlink(config_path)

    def test_to_dict(self):
        """Test converting config to dictionary."""
        config = HestonConfig()
        config_dict = config.to_dict()

        assert isinstance(config_dict, dict)
        assert "Numerics" in config_dict
        assert "Validation" in config_dict
        assert config_dict["Validation"]["dim"] == "4"

    def test_fallback_values(self):
        """Test fallback values when key doesn't exist."""
        config = HestonConfig()

        assert config.get("NonExistent", "key", fallback="default") == "default"
        assert config.get_int("NonExistent", "key", fallback=42) == 42
        assert config.get_float("NonExistent", "key", fallback=3.14) == 3.14
        assert config.get_bool("NonExistent", "key", fallback=True) is True
        assert config.get_list("NonExistent", "key", fallback=["a", "b"]) == ["a", "b"]


class TestGlobalConfig:
    """Test global configuration singleton."""

    def test_get_config_singleton(self):
        """Test that get_config returns singleton."""
        config1 = get_config()
        config2 = get_config()
        assert config1 is config2

    def test_get_config_reload(self):
        """Test reloading configuration."""
        config1 = get_config()
        config2 = get_config(reload=True)
        # Should be different instances after reload
        assert config1 is not config2


class TestConfigCreation:
    """Test configuration file creation."""

    def test_create_default_config(self):
        """Test creating default config file."""
        with tempfile.TemporaryDirectory() as tmpdir:
            config_path = os.path.join(tmpdir, "settings.ini")
            create_default_config(config_path)

            assert os.path.exists(config_path)

            # Verify it can be loaded
            config = HestonConfig(config_path)
            assert config.get_int("Validation", "path_count") == 10000


class TestConfigFinder:
    """Test configuration file discovery."""

    def test_config_env_var(self):
        """Test TENSORHESTON_CONFIG environment variable."""
        with tempfile.NamedTemporaryFile(mode="w", suffix=".ini", delete=False) as f:
            f.write("[Simulation]\n")
            f.write("scheme = exact\n")
            config_path = f.name

        try:
            os.environ["TENSORHESTON_CONFIG"] = config_path
            config = HestonConfig()
            assert config.get("Simulation", "scheme") == "exact"
        finally:
            del os.environ["TENSORHESTON_CONFIG"]
            os.unlink(config_path)


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
