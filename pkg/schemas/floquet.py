"""
Pydantic schemas for stroboscopic averaging and the linear Floquet-Magnus split.
"""

from typing import List, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, PrivateAttr, model_validator

from core.fields import FieldHandle, SeriesEvaluator
from core.matrices import MatrixFunction


class AveragedSystem(BaseModel):
    """Averaged fields G_j, periodic rates R_j and generators W_j = int_0^t R_j."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    g_terms: List[FieldHandle] = Field(..., description="Autonomous G_j(X), order 1 first")
    r_terms: List[FieldHandle] = Field(..., description="Zero-mean T-periodic R_j(x, t)")
    w_terms: List[FieldHandle] = Field(..., description="W_j(x, t), vanishing at t = 0 and t = T")
    period: float = Field(..., gt=0, description="Period T")

    _averaged: Optional[SeriesEvaluator] = PrivateAttr(default=None)
    _generator: Optional[SeriesEvaluator] = PrivateAttr(default=None)

    @model_validator(mode="after")
    def validate_orders(self):
        if not self.g_terms:
            raise ValueError("an averaged system needs at least one order")
        if not len(self.g_terms) == len(self.r_terms) == len(self.w_terms):
            raise ValueError("G, R and W must have the same number of orders")
        if any(not g.autonomous for g in self.g_terms):
            raise ValueError("averaged fields must be autonomous")
        return self

    def model_post_init(self, __context) -> None:
        self._averaged = SeriesEvaluator(self.g_terms)
        self._generator = SeriesEvaluator(self.w_terms)

    @property
    def order(self) -> int:
        return len(self.g_terms)

    @property
    def domain_dim(self) -> int:
        return self.g_terms[0].domain_dim

    @property
    def averaged_evaluator(self) -> SeriesEvaluator:
        return self._averaged

    @property
    def generator_evaluator(self) -> SeriesEvaluator:
        return self._generator

    def weights(self, eps: float, order: Optional[int] = None) -> List[float]:
        """eps^j for j <= order, zero beyond."""
        order = self.order if order is None else order
        if not 1 <= order <= self.order:
            raise ValueError(f"order {order} outside 1..{self.order}")
        return [eps**j if j <= order else 0.0 for j in range(1, self.order + 1)]


class FloquetLinearResult(BaseModel):
    """Y(t) = exp(Lambda(t)) exp(t F) with periodic Lambda_k and constant F_k."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    lambda_terms: List[MatrixFunction] = Field(..., description="Lambda_k(t), zero at 0 and T")
    lambda_rates: List[MatrixFunction] = Field(..., description="Lambda_k'(t)")
    f_terms: List[np.ndarray] = Field(..., description="Constant F_k")
    period: float = Field(..., gt=0, description="Period T")

    @model_validator(mode="after")
    def validate_orders(self):
        if not self.f_terms or len(self.f_terms) != len(self.lambda_terms):
            raise ValueError("one F_k per Lambda_k is required")
        return self

    @property
    def order(self) -> int:
        return len(self.f_terms)
