"""
Pydantic schemas for the reference integrator.
"""

from typing import List, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from core.config import settings


class IntegratorConfig(BaseModel):
    """Tolerances and outputs of one integration."""

    rel_tol: float = Field(
        default_factory=lambda: settings.ODE_TOL, gt=0, description="Relative tolerance"
    )
    abs_tol: float = Field(
        default_factory=lambda: settings.ODE_TOL, gt=0, description="Absolute tolerance"
    )
    max_steps: int = Field(
        default_factory=lambda: settings.MAX_STEPS, ge=1, description="Step cap"
    )
    dense_output: List[float] = Field(
        default_factory=list,
        description="Requested output times; the controller lands on each exactly",
    )
    fixed_steps: Optional[int] = Field(
        None, ge=1, description="Take this many equal steps without error control; a requested output time splits the step it falls in"
    )
    first_step: Optional[float] = Field(None, gt=0, description="Initial step override")

    @field_validator("dense_output")
    def validate_dense_output(cls, v):
        if any(not np.isfinite(t) for t in v):
            raise ValueError("output times must be finite")
        return sorted(set(float(t) for t in v))

    @classmethod
    def with_tolerance(cls, tol: Optional[float] = None, **kwargs) -> "IntegratorConfig":
        tol = settings.ODE_TOL if tol is None else tol
        return cls(rel_tol=tol, abs_tol=tol, **kwargs)


class IntegrationStats(BaseModel):
    """Bookkeeping of one integration."""

    rel_tol: float
    abs_tol: float
    steps: int = Field(0, description="Accepted steps")
    rejected_steps: int = Field(0, description="Rejected steps")
    evaluations: int = Field(0, description="Right-hand side evaluations")


class Trajectory(BaseModel):
    """Time-stamped states; slopes allow Hermite sampling between them."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    times: np.ndarray = Field(..., description="Strictly increasing times, shape (n,)")
    states: np.ndarray = Field(..., description="States, shape (n, d)")
    slopes: Optional[np.ndarray] = Field(None, description="dx/dt at each time, shape (n, d)")
    meta: IntegrationStats

    @model_validator(mode="after")
    def validate_shapes(self):
        if self.times.ndim != 1 or self.states.ndim != 2:
            raise ValueError("times must be 1-D and states 2-D")
        if self.states.shape[0] != self.times.shape[0]:
            raise ValueError("one state per time is required")
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("times must be strictly increasing")
        if not np.all(np.isfinite(self.states)):
            raise ValueError("states must be finite")
        if self.slopes is not None and self.slopes.shape != self.states.shape:
            raise ValueError("slopes must match states")
        return self

    @property
    def final_state(self) -> np.ndarray:
        return self.states[-1]

    @property
    def dimension(self) -> int:
        return self.states.shape[1]

    def state_at(self, t: float, atol: float = 1e-12) -> np.ndarray:
        """Stored state at time t (t must be an output time)."""
        index = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[index] - t) > atol * max(1.0, abs(t)):
            raise KeyError(f"no stored state at t={t}")
        return self.states[index]

    def sample(self, times) -> np.ndarray:
        """Cubic Hermite interpolation between stored points."""
        if self.slopes is None:
            raise ValueError("trajectory carries no slopes")
        times = np.atleast_1d(np.asarray(times, dtype=float))
        if times.size and (times.min() < self.times[0] or times.max() > self.times[-1]):
            raise ValueError("sample times outside the integrated interval")
        if len(self.times) == 1:
            return np.repeat(self.states[:1], len(times), axis=0)
        index = np.clip(
            np.searchsorted(self.times, times, side="right") - 1, 0, len(self.times) - 2
        )
        t0, t1 = self.times[index], self.times[index + 1]
        h = (t1 - t0)[:, None]
        theta = ((times - t0) / (t1 - t0))[:, None]
        y0, y1 = self.states[index], self.states[index + 1]
        f0, f1 = self.slopes[index], self.slopes[index + 1]
        return (1 - theta) * y0 + theta * y1 + theta * (theta - 1) * (
            (1 - 2 * theta) * (y1 - y0) + (theta - 1) * h * f0 + theta * h * f1
        )
