import io
import sys
from pathlib import Path

import numpy as np
import pytest

from src.common.config import Settings
from src.common.errors import ConfigError, HGQAError, ShapeError, TrainingDivergedError
from src.common.logging import configure_logging, get_logger


def test_defaults(monkeypatch):
    # Arrange
    for key in ("HGQA_DATA_ROOT", "HGQA_PRECISION", "HGQA_SEED", "HGQA_JOBS"):
        monkeypatch.delenv(key, raising=False)

    # Act
    settings = Settings(_env_file=None)

    # Assert
    assert settings.HGQA_SEED == 7
    assert settings.get_precision_dtype() == np.dtype(np.float64)
    assert settings.get_jobs() >= 1

def test_environment_overrides(monkeypatch):
    # Arrange
    monkeypatch.setenv("HGQA_PRECISION", "float32")
    monkeypatch.setenv("HGQA_JOBS", "3")

    # Act
    settings = Settings(_env_file=None)

    # Assert
    assert settings.get_precision_dtype() == np.dtype(np.float32)
    assert settings.get_jobs() == 3

def test_unsupported_precision(monkeypatch):
    monkeypatch.setenv("HGQA_PRECISION", "float16")
    with pytest.raises(ValueError, match="Unsupported precision"):
        Settings(_env_file=None).get_precision_dtype()

def test_data_root_resolution(monkeypatch, tmp_path):
    # Arrange
    monkeypatch.setenv("HGQA_DATA_ROOT", str(tmp_path))
    settings = Settings(_env_file=None)

    # Act / Assert
    assert settings.resolve_data_path("dev.json") == tmp_path / "dev.json"
    assert settings.resolve_data_path("/abs/dev.json") == Path("/abs/dev.json")


def test_hierarchy():
    assert issubclass(ShapeError, HGQAError) and issubclass(ShapeError, ValueError)
    assert issubclass(ConfigError, HGQAError)

def test_divergence_carries_step():
    # Act
    error = TrainingDivergedError(12, float("inf"))

    # Assert
    assert error.step == 12
    assert "step 12" in str(error)


def test_logging_survives_a_closed_stderr(monkeypatch):
    # Arrange
    stream = io.StringIO()
    monkeypatch.setattr(sys, "stderr", stream)
    configure_logging("INFO", "json")
    stream.close()
    monkeypatch.undo()

    # Act / Assert
    get_logger("tests.common").info("stream_closed_before_event", attempt=1)

def test_reconfigured_logging_reaches_the_stdlib_logger(caplog):
    # Arrange
    configure_logging("INFO", "json")

    # Act
    with caplog.at_level("INFO"):
        get_logger("tests.common").info("event_routed", value=3)

    # Assert
    assert any("event_routed" in record.getMessage() for record in caplog.records)
