import os
from pathlib import Path
from typing import Dict, Any

import numpy as np
from pydantic import BaseSettings, Field


class Settings(BaseSettings):
    # Data Configuration
    HGQA_DATA_ROOT: str = Field(default="")

    # Numerics Configuration
    HGQA_PRECISION: str = Field(default="float64")
    HGQA_SEED: int = Field(default=7)

    # Parallelism Configuration
    HGQA_JOBS: int = Field(default=0)

    # Logging Configuration
    LOG_LEVEL: str = Field(default="INFO")
    LOG_FORMAT: str = Field(default="json")

    class Config:
        env_file = ".env"
        case_sensitive = True

    @classmethod
    def get_settings(cls) -> "Settings":
        return cls()

    def get_precision_dtype(self) -> np.dtype:
        if self.HGQA_PRECISION not in ("float64", "float32"):
            raise ValueError(f"Unsupported precision: {self.HGQA_PRECISION}")
        return np.dtype(self.HGQA_PRECISION)

    def get_jobs(self) -> int:
        if self.HGQA_JOBS > 0:
            return self.HGQA_JOBS
        return os.cpu_count() or 1

    def resolve_data_path(self, path: str) -> Path:
        """Resolve a relative dataset path against HGQA_DATA_ROOT."""
        candidate = Path(path)
        if candidate.is_absolute() or not self.HGQA_DATA_ROOT:
            return candidate
        return Path(self.HGQA_DATA_ROOT) / candidate

    def get_logging_config(self) -> Dict[str, Any]:
        return {
            "level": self.LOG_LEVEL,
            "format": self.LOG_FORMAT,
        }


# Create a global settings instance
settings = Settings.get_settings()
