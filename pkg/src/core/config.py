"""Application configuration management using pydantic-settings.

This module provides centralized configuration for process-level knobs
(logging, parallelism, solver tolerances), loaded from environment
variables prefixed with ``MONO_`` and an optional ``.env`` file.
Experiment descriptions are not settings; they live in
:class:`src.models.schemas.Scenario`.
"""

from functools import lru_cache

from pydantic import Field, field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """Process settings loaded from environment variables.

    Attributes:
        app_name: Name of the application.
        app_version: Version of the application.
        log_level: Logging level.
        log_format: Log format (json or text).
        log_file: Optional log file path.
        threads: Width of the parallel maps over loads, test sets and pixels.
        solver_rtol: Relative tolerance of the iterative fallback solver.
        residual_tol: Largest relative residual accepted after any solve.
        refinement_steps: Iterative refinement passes after a direct solve.
        symmetry_tol: Relative ND-matrix asymmetry above which a warning is logged.
        tau_floor_rel: Lower bound of a calibrated threshold, relative to the
            spectral norm of the background ND matrix.
        output_dir: Default directory for CLI outputs.
    """

    model_config = SettingsConfigDict(
        env_prefix="MONO_",
        env_file=".env",
        env_file_encoding="utf-8",
        case_sensitive=False,
        extra="ignore",
    )

    # Application
    app_name: str = Field(default="elastic-monotonicity")
    app_version: str = Field(default="1.0.0")

    # Logging
    log_level: str = Field(default="INFO")
    log_format: str = Field(default="text")
    log_file: str | None = Field(default=None)

    # Parallelism
    threads: int = Field(default=1, ge=1)

    # Numerics
    solver_rtol: float = Field(default=1e-12, gt=0.0)
    residual_tol: float = Field(default=1e-10, gt=0.0)
    refinement_steps: int = Field(default=2, ge=0)
    symmetry_tol: float = Field(default=1e-10, gt=0.0)
    tau_floor_rel: float = Field(default=1e-10, ge=0.0)

    # Output
    output_dir: str = Field(default="./out")

    @field_validator("log_format")
    @classmethod
    def check_log_format(cls, v: str) -> str:
        """Accept only the two renderers the logging setup knows.

        Args:
            v: Input value.

        Returns:
            Normalized format name.
        """
        v = v.lower()
        if v not in {"json", "text"}:
            raise ValueError("log_format must be 'json' or 'text'")
        return v


@lru_cache
def get_settings() -> Settings:
    """Get cached application settings.

    Returns:
        Application settings instance.
    """
    return Settings()
