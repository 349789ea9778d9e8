"""
Configuration settings management for sympb.
Loads settings from config.yaml and environment variables.
"""

import os
from pathlib import Path
from typing import Optional

import yaml
from pydantic import BaseModel, Field


class GeometrySettings(BaseModel):
    """Curve construction and frame tolerances."""
    grid_size: int = Field(4096, ge=16)
    frame_tol: float = 1e-8
    derivative_tol: float = 1e-6
    conic_tol: float = 1e-8
    chop_factor: float = 64.0
    unimodular_tol: float = 1e-10


class SolverSettings(BaseModel):
    """Root finding and orbit optimization."""
    root_tol: float = 1e-12
    gradient_tol: float = 1e-11
    bounce_tol: float = 1e-9
    max_newton: int = 50
    max_fallback: int = 500
    extended_precision: int = Field(40, ge=20)


class OperatorSettings(BaseModel):
    """Isospectral operator truncation."""
    gamma: float = 3.5
    modes: int = Field(128, ge=2)
    rows: int = Field(128, ge=2)
    kernel_rtol: float = 1e-8
    split_index: int = Field(8, ge=0)


class DeformationSettings(BaseModel):
    """Deformation families."""
    step: float = 1e-4
    modes: int = Field(128, ge=2)
    xray_tol: float = 1e-7
    length_tol: float = 1e-9
    matching_tol: float = 1e-9


class RuntimeSettings(BaseModel):
    """Parallelism and logging."""
    threads: int = Field(0, ge=0)
    log_level: str = "WARNING"


class Settings(BaseModel):
    """Application settings."""
    geometry: GeometrySettings = Field(default_factory=GeometrySettings)
    solver: SolverSettings = Field(default_factory=SolverSettings)
    operator: OperatorSettings = Field(default_factory=OperatorSettings)
    deformation: DeformationSettings = Field(default_factory=DeformationSettings)
    runtime: RuntimeSettings = Field(default_factory=RuntimeSettings)

    @classmethod
    def load(cls, config_path: Optional[Path] = None) -> "Settings":
        """
        Load settings from config file.

        Searches for config.yaml in:
        1. Provided path
        2. Current directory
        3. User's home directory (~/.sympb/config.yaml)
        """
        search_paths = []

        if config_path:
            search_paths.append(Path(config_path))

        search_paths.extend([
            Path.cwd() / "config.yaml",
            Path.home() / ".sympb" / "config.yaml",
        ])

        for path in search_paths:
            if path.exists():
                with open(path, "r") as f:
                    data = yaml.safe_load(f)
                    return cls.model_validate(data) if data else cls()

        # Return defaults if no config found
        return cls()

    def get_threads(self) -> int:
        """Worker cap for parallel q rows, with env override support."""
        raw = os.environ.get("SYMPB_THREADS")
        threads = int(raw) if raw else self.runtime.threads
        if threads <= 0:
            threads = os.cpu_count() or 1
        return threads

    def get_grid_size(self) -> int:
        """Default curve resolution, with env override support."""
        raw = os.environ.get("SYMPB_GRID")
        return int(raw) if raw else self.geometry.grid_size

    def get_log_level(self) -> str:
        """Log level name, with env override support."""
        return os.environ.get("SYMPB_LOG_LEVEL", self.runtime.log_level).upper()


# Global settings instance
_settings: Optional[Settings] = None


def get_settings() -> Settings:
    """Get or create the global settings instance."""
    global _settings
    if _settings is None:
        _settings = Settings.load()
    return _settings


def reload_settings(config_path: Optional[Path] = None) -> Settings:
    """Reload settings from config file."""
    global _settings
    _settings = Settings.load(config_path)
    return _settings
