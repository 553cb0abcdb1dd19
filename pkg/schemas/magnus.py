"""
Pydantic schemas for linear and nonlinear Magnus expansions.
"""

from fractions import Fraction
from functools import reduce
from math import factorial
from typing import List, Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, PrivateAttr, field_validator

from core.fields import FieldHandle, LinearCombination, SeriesEvaluator
from core.matrices import MatrixFunction
from schemas.integrator import Trajectory


class BernoulliTable(BaseModel):
    """Exact Bernoulli numbers B_0..B_max, B_1 = -1/2."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    values: List[Fraction] = Field(..., description="B_0..B_max as exact rationals")

    @property
    def max_index(self) -> int:
        return len(self.values) - 1

    def coefficient(self, j: int) -> Fraction:
        """B_j / j!, the weight of ad^j in the inverse dexp series."""
        return self.values[j] / factorial(j)


class MagnusTerms(BaseModel):
    """Omega_1..Omega_n and their rates R_j = Omega_j' as matrix functions."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    omega: List[MatrixFunction] = Field(..., description="Omega_j(t), order 1 first")
    rates: List[MatrixFunction] = Field(..., description="R_j(t) = d Omega_j / dt")
    route: Literal["recursive", "prelie"] = Field(..., description="Construction route")

    @property
    def order(self) -> int:
        return len(self.omega)

    def omega_at(self, t: float) -> List[np.ndarray]:
        return [term.at(t) for term in self.omega]

    def rates_at(self, t: float) -> List[np.ndarray]:
        return [term.at(t) for term in self.rates]

    def summed_at(self, t: float, eps: float) -> np.ndarray:
        return summed_matrices(self.omega_at(t), eps)


class GeneratorSeries(BaseModel):
    """W = sum_j eps^j W_j with W_j = integral of R_j from 0."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    terms: List[FieldHandle] = Field(..., description="W_j(x, t), order 1 first")
    rates: List[FieldHandle] = Field(..., description="R_j(x, t) = dW_j/dt")
    eps: float = Field(1.0, description="Default perturbation parameter")

    _evaluator: Optional[SeriesEvaluator] = PrivateAttr(default=None)

    @field_validator("terms")
    def validate_terms(cls, v):
        if not v:
            raise ValueError("a generator needs at least one term")
        return v

    def model_post_init(self, __context) -> None:
        self._evaluator = SeriesEvaluator(self.terms)

    @property
    def order(self) -> int:
        return len(self.terms)

    @property
    def domain_dim(self) -> int:
        return self.terms[0].domain_dim

    @property
    def evaluator(self) -> SeriesEvaluator:
        return self._evaluator

    def weights(self, eps: Optional[float] = None) -> List[float]:
        eps = self.eps if eps is None else eps
        return [eps**j for j in range(1, self.order + 1)]

    def summed(self, eps: Optional[float] = None) -> FieldHandle:
        pairs = zip(self.weights(eps), self.terms)
        return LinearCombination.of(pairs, self.domain_dim)


class FlowResult(BaseModel):
    """End point of the s-flow of a frozen generator."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    state: np.ndarray = Field(..., description="y(1)")
    s_trajectory: Optional[Trajectory] = Field(
        None, description="Auxiliary integration over s in [0, 1]"
    )
    order_used: int = Field(..., ge=1, description="Number of generator terms summed")

    @field_validator("s_trajectory")
    def validate_span(cls, v):
        if v is not None and (v.times[0] != 0.0 or v.times[-1] != 1.0):
            raise ValueError("s-integration must span [0, 1]")
        return v


def summed_matrices(matrices: List[np.ndarray], eps: float) -> np.ndarray:
    return reduce(
        lambda total, item: total + item,
        [eps ** (j + 1) * m for j, m in enumerate(matrices)],
    )
