"""
Configuration module for the liegen expansion library and experiment runner.
"""

import os
from typing import Optional

from pydantic import Field, field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """
    Settings class for liegen.

    Uses environment variables with the LIEGEN_ prefix (e.g. LIEGEN_THREADS).
    """

    # Pydantic v2 model configuration
    model_config = SettingsConfigDict(
        env_prefix="LIEGEN_",
        env_file=".env",
        env_file_encoding="utf-8",
        case_sensitive=False,
        extra="ignore",
    )

    # Parallel sweeps
    THREADS: Optional[int] = Field(
        None, description="Cap on parallel sweep workers (default: machine parallelism)"
    )

    # Expansion limits
    MAX_JET_ORDER: int = Field(
        3, description="Highest x-derivative order available from a field (default: 3)"
    )
    MAX_MAGNUS_ORDER: int = Field(
        6, description="Highest order of the recursive Magnus route (default: 6)"
    )

    # Quadrature
    QUAD_NODES: int = Field(
        16, description="Gauss-Legendre nodes per panel for time integrals (default: 16)"
    )
    TRIG_QUAD_NODES: int = Field(
        64, description="Nodes for trigonometric integrands and period averages (default: 64)"
    )
    SIMPLEX_NODES: int = Field(
        12, description="Nodes per dimension of the simplex oracles (default: 12)"
    )
    FOURIER_MODES: int = Field(
        16, description="Fourier modes of the zero-mean periodic antiderivative (default: 16)"
    )

    # Integrator
    ODE_TOL: float = Field(
        1e-10, description="Tolerance of flow reconstructions and averaged solves"
    )
    REFERENCE_TOL: float = Field(
        1e-12, description="Tolerance of brute-force reference solves"
    )
    MAX_STEPS: int = Field(200000, description="Step cap of one integration")

    # Runner
    LOG_LEVEL: str = Field("INFO", description="Logging level of the entry points")
    RESULTS_DIR: str = Field("results", description="Default experiment output directory")

    @field_validator(
        "MAX_JET_ORDER",
        "MAX_MAGNUS_ORDER",
        "QUAD_NODES",
        "TRIG_QUAD_NODES",
        "SIMPLEX_NODES",
        "FOURIER_MODES",
        "MAX_STEPS",
    )
    def validate_positive_count(cls, v):
        if v < 1:
            raise ValueError("counts must be positive")
        return v

    @field_validator("THREADS")
    def validate_threads(cls, v):
        if v is not None and v < 1:
            raise ValueError("LIEGEN_THREADS must be a positive integer")
        return v

    @field_validator("ODE_TOL", "REFERENCE_TOL")
    def validate_tolerance(cls, v):
        if not v > 0:
            raise ValueError("tolerances must be positive")
        return v

    @field_validator("LOG_LEVEL")
    def validate_log_level(cls, v):
        level = v.upper()
        if level not in ("CRITICAL", "ERROR", "WARNING", "INFO", "DEBUG"):
            raise ValueError(f"Unknown log level: {v}")
        return level

    def worker_count(self) -> int:
        """Effective number of sweep workers."""
        if self.THREADS is not None:
            return self.THREADS
        return os.cpu_count() or 1


# Global settings instance
settings = Settings()
