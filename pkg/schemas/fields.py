"""
Pydantic schemas for fields, quadrature and per-order series.
"""

from functools import reduce
from typing import Any, List, Literal, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator

from core.config import settings
from core.quadrature import GAUSS_LEGENDRE, PERIODIC_MIDPOINT, cumulative_matrix, unit_rule


class QuadratureRule(BaseModel):
    """Composite rule for time integrals, mapped to [0, t] or [0, T] on use."""

    model_config = ConfigDict(frozen=True)

    kind: Literal["gauss-legendre", "periodic-midpoint"] = Field(
        GAUSS_LEGENDRE,
        description="Gauss-Legendre, or equispaced midpoints for full-period averages only",
    )
    nodes_per_panel: int = Field(
        default_factory=lambda: settings.QUAD_NODES,
        ge=1,
        description="Nodes per panel",
    )
    panels: int = Field(1, ge=1, description="Number of equal panels")

    @classmethod
    def trigonometric(cls) -> "QuadratureRule":
        """Default rule for rotating-frame (trigonometric) integrands."""
        return cls(nodes_per_panel=settings.TRIG_QUAD_NODES)

    @classmethod
    def simplex(cls) -> "QuadratureRule":
        """Per-dimension rule of the simplex oracles."""
        return cls(nodes_per_panel=settings.SIMPLEX_NODES)

    @property
    def size(self) -> int:
        return self.nodes_per_panel * self.panels

    def unit(self) -> Tuple[np.ndarray, np.ndarray]:
        """Nodes and weights on [0, 1]."""
        return unit_rule(self.kind, self.nodes_per_panel, self.panels)

    def on_interval(self, start: float, stop: float) -> Tuple[np.ndarray, np.ndarray]:
        nodes, weights = self.unit()
        length = stop - start
        return start + length * nodes, length * weights

    def cumulative(self) -> np.ndarray:
        """Integration matrix from 0 to each node (Gauss-Legendre only)."""
        if self.kind != GAUSS_LEGENDRE:
            raise ValueError(f"{PERIODIC_MIDPOINT} rules only integrate full periods")
        return cumulative_matrix(self.nodes_per_panel, self.panels)


class AntiderivativeMode(BaseModel):
    """Which inverse of d/dt a pre-Lie product uses."""

    model_config = ConfigDict(frozen=True)

    kind: Literal["from-zero", "zero-mean-fourier"] = Field(
        "from-zero", description="Integral from t=0, or the zero-mean periodic antiderivative"
    )
    period: Optional[float] = Field(
        None, gt=0, description="Period T of the Fourier form (default: the field's period)"
    )
    modes: int = Field(
        default_factory=lambda: settings.FOURIER_MODES,
        ge=1,
        description="Fourier modes K resolved by the Fourier form",
    )

    @classmethod
    def from_zero(cls) -> "AntiderivativeMode":
        return cls()

    @classmethod
    def zero_mean_fourier(
        cls, period: Optional[float] = None, modes: Optional[int] = None
    ) -> "AntiderivativeMode":
        if modes is None:
            return cls(kind="zero-mean-fourier", period=period)
        return cls(kind="zero-mean-fourier", period=period, modes=modes)

    @property
    def is_fourier(self) -> bool:
        return self.kind == "zero-mean-fourier"


class JetValue(BaseModel):
    """Value and x-derivative tensors of a field at one point."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    value: np.ndarray = Field(..., description="f(x, t), shape (d,)")
    derivs: List[np.ndarray] = Field(
        default_factory=list,
        description="Derivative tensors; entry k-1 has shape (d,) + (d,)*k, index [i, j1..jk]",
    )

    @property
    def order(self) -> int:
        return len(self.derivs)

    @property
    def jacobian(self) -> np.ndarray:
        if not self.derivs:
            raise ValueError("jet carries no derivatives")
        return self.derivs[0]


class SeriesTerms(BaseModel):
    """Per-order terms X_1..X_n of a series sum_j eps^j X_j."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    role: Literal["R", "W", "Omega", "Lambda", "G", "F", "V"] = Field(
        ..., description="Which series the terms belong to"
    )
    terms: List[Any] = Field(..., description="Fields or matrix functions, order 1 first")

    @field_validator("terms")
    def validate_terms(cls, v):
        if not v:
            raise ValueError("a series needs at least one term")
        return v

    @property
    def order(self) -> int:
        return len(self.terms)

    def term(self, j: int) -> Any:
        """Order-j term, 1-based."""
        if not 1 <= j <= self.order:
            raise IndexError(f"order {j} outside 1..{self.order}")
        return self.terms[j - 1]

    def summed(self, eps: float = 1.0, order: Optional[int] = None) -> Any:
        """sum_{j <= order} eps^j X_j."""
        order = self.order if order is None else order
        scaled = [eps**j * self.terms[j - 1] for j in range(1, order + 1)]
        return reduce(lambda total, item: total + item, scaled)
