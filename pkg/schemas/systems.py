"""
Pydantic schemas for the worked systems.
"""

from typing import Callable, Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from core.fields import FieldHandle

MAX_NLS_MODES = 8


class RotatingFrameSystem(BaseModel):
    """u' = A u + eps h(u) with exp(T A) = I."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    a_matrix: np.ndarray = Field(..., description="Constant linear part A")
    h: FieldHandle = Field(..., description="Autonomous nonlinearity h(u)")
    period: float = Field(..., gt=0, description="Period T of the frame exp(tA)")
    frame: Optional[Callable] = Field(
        None, description="Closed form of t -> exp(tA) (batched), if known"
    )
    name: str = Field("system", description="Display name")

    @field_validator("a_matrix")
    def validate_matrix(cls, v):
        v = np.asarray(v, dtype=float)
        if v.ndim != 2 or v.shape[0] != v.shape[1]:
            raise ValueError(f"A must be square, got shape {v.shape}")
        return v

    @model_validator(mode="after")
    def validate_dimension(self):
        if self.h.domain_dim != self.a_matrix.shape[0]:
            raise ValueError("h and A act on different dimensions")
        return self

    @property
    def dim(self) -> int:
        return self.a_matrix.shape[0]


class SpectralNLSConfig(BaseModel):
    """
    Spectral truncation of i psi_t = -psi_zz + k(|psi|^2) psi on [0, a).

    Ranges are checked by the system service, which raises ConfigInvalid.
    """

    length: float = Field(2.0 * np.pi, description="Torus length a")
    modes: int = Field(8, description="Mode cutoff M; modes l = -M..M are kept")
    nonlinearity: Literal["cubic", "quintic", "saturable"] = Field(
        "cubic", description="k(r) = r, r^2 or r / (1 + r)"
    )
    strength: float = Field(1.0, description="Factor multiplying k")
    grid_points: Optional[int] = Field(
        None, description="Collocation points (default and minimum 4M + 1)"
    )

    @property
    def period(self) -> float:
        return self.length**2 / (2.0 * np.pi)

    @property
    def dim(self) -> int:
        return 2 * (2 * self.modes + 1)

    @property
    def grid_size(self) -> int:
        return max(4 * self.modes + 1, self.grid_points or 0)

    def wavenumbers(self) -> np.ndarray:
        return np.arange(-self.modes, self.modes + 1)

    def frequencies(self) -> np.ndarray:
        """kappa_l = (2 pi l / a)^2."""
        return (2.0 * np.pi * self.wavenumbers() / self.length) ** 2
