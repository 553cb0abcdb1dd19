"""
Pydantic schemas for experiment configuration and results.
"""

from typing import Any, Dict, List, Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, field_validator

from core.config import settings

ExperimentName = Literal[
    "magnus-linear-order",
    "magnus-nonlinear",
    "vdp-averaging",
    "vdp-limit-cycle",
    "nls-averaging",
    "oracle-crosscheck",
]

EXPERIMENTS: List[str] = list(ExperimentName.__args__)
SYSTEMS: List[str] = ["vdp", "nls1d", "linear-ab", "random"]

DEFAULT_EPS: Dict[str, List[float]] = {
    "magnus-linear-order": [0.2, 0.1, 0.05, 0.025],
    "magnus-nonlinear": [0.1, 0.05, 0.025],
    "vdp-averaging": [0.05],
    "vdp-limit-cycle": [0.1],
    "nls-averaging": [0.1],
    "oracle-crosscheck": [1.0],
}


class ExperimentConfig(BaseModel):
    """One experiment run; unknown keys are rejected."""

    model_config = ConfigDict(extra="forbid")

    experiment: ExperimentName = Field(..., description="Experiment to run")
    system: Optional[str] = Field(None, description="System name (default per experiment)")
    eps: Optional[Union[float, List[float]]] = Field(
        None, description="Perturbation parameter or sweep (default per experiment)"
    )
    order: int = Field(2, ge=1, description="Truncation order")
    t_end: Optional[float] = Field(None, gt=0, description="Final time (default per experiment)")
    quad_nodes: int = Field(16, ge=1, description="Gauss-Legendre nodes per panel")
    tol: float = Field(1e-10, gt=0, description="Integrator tolerance")
    out_dir: str = Field(default_factory=lambda: settings.RESULTS_DIR, description="Output directory")
    seed: int = Field(0, ge=0, description="Seed for random matrices and points")

    @field_validator("system")
    def validate_system(cls, v):
        if v is not None and v not in SYSTEMS:
            raise ValueError(f"unknown system {v!r}; expected one of {SYSTEMS}")
        return v

    @field_validator("eps")
    def validate_eps(cls, v):
        values = v if isinstance(v, list) else [v] if v is not None else []
        if isinstance(v, list) and not v:
            raise ValueError("eps sweep must not be empty")
        if any(e <= 0 for e in values):
            raise ValueError("eps must be positive")
        return v

    def eps_values(self) -> List[float]:
        if self.eps is None:
            return list(DEFAULT_EPS[self.experiment])
        if isinstance(self.eps, list):
            return [float(e) for e in self.eps]
        return [float(self.eps)]


class ExperimentSummary(BaseModel):
    """Scalar diagnostics of a run, written as summary.json."""

    experiment: ExperimentName
    system: str
    passed: bool = Field(..., description="True iff every declared tolerance holds")
    checks: Dict[str, bool] = Field(default_factory=dict, description="Pass flag per check")
    diagnostics: Dict[str, Any] = Field(default_factory=dict, description="Computed values")
    tolerances: Dict[str, float] = Field(default_factory=dict, description="Declared bounds")
    config: Dict[str, Any] = Field(default_factory=dict, description="Echo of the configuration")


class ExperimentCatalog(BaseModel):
    """Experiments and systems the runner knows."""

    experiments: List[str]
    systems: List[str]
    default_eps: Dict[str, List[float]]
