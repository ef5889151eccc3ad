"""Tests for configuration module."""

import pytest
from unittest.mock import patch

from opm_lightshift.config import Settings, configure_settings, get_settings, reset_settings


class TestSettings:
    """Tests for Settings class."""

    def setup_method(self):
        """Reset settings before each test."""
        reset_settings()

    def teardown_method(self):
        """Reset settings after each test."""
        reset_settings()

    def test_default_values(self):
        """Test default configuration values."""
        with patch.dict("os.environ", {}, clear=True):
            settings = Settings(_env_file=None)
            assert settings.threads == 1
            assert settings.mixing == 0.5
            assert settings.max_iter == 500
            assert settings.sz_tolerance == 1e-12
            assert settings.residual_tolerance == 1e-10
            assert settings.restrict_coherences is True
            assert settings.reference_detuning_hz == 1e12
            assert settings.log_level == "WARNING"

    def test_output_dir_expansion(self):
        """Test that ~ is expanded in output_dir."""
        with patch.dict("os.environ", {"OPM_OUTPUT_DIR": "~/opm-output"}, clear=True):
            settings = Settings(_env_file=None)
            assert "~" not in str(settings.output_dir)
            assert settings.output_dir.is_absolute()

    def test_env_variable_override_threads(self, monkeypatch):
        """Test environment variable overrides for threads."""
        monkeypatch.setenv("OPM_THREADS", "8")
        settings = Settings()
        assert settings.threads == 8

    def test_env_variable_override_mixing(self, monkeypatch):
        """Test environment variable overrides for mixing."""
        monkeypatch.setenv("OPM_MIXING", "0.3")
        settings = Settings()
        assert settings.mixing == 0.3

    def test_env_variable_override_restrict(self, monkeypatch):
        """Test boolean environment variables."""
        monkeypatch.setenv("OPM_RESTRICT_COHERENCES", "false")
        settings = Settings()
        assert settings.restrict_coherences is False

    def test_log_level_case_insensitive(self, monkeypatch):
        """Lower-case log levels are accepted."""
        monkeypatch.setenv("OPM_LOG_LEVEL", "debug")
        settings = Settings()
        assert settings.log_level == "DEBUG"

    def test_validation_log_level(self, monkeypatch):
        """Unknown log levels are rejected."""
        monkeypatch.setenv("OPM_LOG_LEVEL", "LOUD")
        with pytest.raises(ValueError):
            Settings()

    def test_validation_mixing_range(self, monkeypatch):
        """Test mixing validation (0 < α <= 1)."""
        monkeypatch.setenv("OPM_MIXING", "0")
        with pytest.raises(ValueError):
            Settings()
        monkeypatch.setenv("OPM_MIXING", "1.5")
        with pytest.raises(ValueError):
            Settings()

    def test_validation_threads_minimum(self, monkeypatch):
        """Test threads validation (minimum 1)."""
        monkeypatch.setenv("OPM_THREADS", "0")
        with pytest.raises(ValueError):
            Settings()

    def test_validation_scan_points_minimum(self, monkeypatch):
        """Test scan_points validation (minimum 11)."""
        monkeypatch.setenv("OPM_SCAN_POINTS", "5")
        with pytest.raises(ValueError):
            Settings()

    def test_ensure_directories(self, tmp_path):
        """ensure_directories creates the output directory."""
        settings = Settings(output_dir=tmp_path / "runs" / "a")
        settings.ensure_directories()
        assert (tmp_path / "runs" / "a").is_dir()


class TestSettingsSingleton:
    """Tests for settings singleton functions."""

    def setup_method(self):
        """Reset settings before each test."""
        reset_settings()

    def teardown_method(self):
        """Reset settings after each test."""
        reset_settings()

    def test_get_settings_returns_same_instance(self):
        """Test that get_settings returns singleton."""
        s1 = get_settings()
        s2 = get_settings()
        assert s1 is s2

    def test_reset_settings(self):
        """Test that reset_settings clears singleton."""
        s1 = get_settings()
        reset_settings()
        s2 = get_settings()
        assert s1 is not s2

    def test_configure_settings(self):
        """Test configure_settings creates new instance."""
        settings = configure_settings(mixing=0.25, max_iter=50)
        assert settings.mixing == 0.25
        assert settings.max_iter == 50
        assert get_settings() is settings
