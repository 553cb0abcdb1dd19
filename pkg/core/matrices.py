"""
Time-dependent matrices A(t) for the linear Magnus and Floquet paths.
"""

from typing import Callable, Optional, Sequence

import jax.numpy as jnp
import numpy as np

from core.exceptions import DimensionMismatch

MatrixFn = Callable[[jnp.ndarray], jnp.ndarray]


def _common_period(first: "MatrixFunction", second: "MatrixFunction") -> Optional[float]:
    if first.constant:
        return second.period
    if second.constant:
        return first.period
    if first.period is None or second.period is None:
        return None
    if abs(first.period - second.period) > 1e-12 * max(first.period, second.period):
        return None
    return first.period


class MatrixFunction:
    """
    A d x d matrix function of time, evaluated batched: t of shape (...)
    gives an array of shape (..., d, d). Real or complex.
    """

    def __init__(
        self,
        fn: MatrixFn,
        dim: int,
        period: Optional[float] = None,
        degree: Optional[int] = None,
        constant: bool = False,
        traceable: bool = True,
        name: str = "A",
    ):
        if dim < 1:
            raise DimensionMismatch(f"matrix dimension must be positive, got {dim}")
        self._fn = fn
        self.dim = int(dim)
        self.period = None if period is None else float(period)
        self.degree = 0 if constant else degree
        self.constant = constant
        self.traceable = traceable
        self.name = name

    def __call__(self, t) -> jnp.ndarray:
        return self._fn(jnp.asarray(t, dtype=jnp.float64))

    def at(self, t) -> np.ndarray:
        return np.asarray(self(t))

    @classmethod
    def from_constant(cls, matrix, period: Optional[float] = None, name: str = "C") -> "MatrixFunction":
        value = jnp.asarray(np.asarray(matrix))
        if value.ndim != 2 or value.shape[0] != value.shape[1]:
            raise DimensionMismatch(f"expected a square matrix, got shape {value.shape}")
        return cls(
            lambda t: jnp.broadcast_to(value, t.shape + value.shape),
            value.shape[0],
            period=period,
            constant=True,
            name=name,
        )

    @classmethod
    def polynomial(
        cls, coefficients: Sequence, period: Optional[float] = None, name: str = "A"
    ) -> "MatrixFunction":
        """A(t) = sum_k C_k t^k from coefficients C_0..C_m."""
        stacked = jnp.asarray(np.asarray(coefficients))
        if stacked.ndim != 3 or stacked.shape[1] != stacked.shape[2]:
            raise DimensionMismatch(
                f"expected coefficients of shape (m+1, d, d), got {stacked.shape}"
            )
        powers = jnp.arange(stacked.shape[0])

        def evaluate(t):
            return jnp.einsum("...k,kij->...ij", t[..., None] ** powers, stacked)

        return cls(
            evaluate,
            stacked.shape[1],
            period=period,
            degree=stacked.shape[0] - 1,
            constant=stacked.shape[0] == 1,
            name=name,
        )

    @classmethod
    def trigonometric(
        cls, mean, cosine_terms: Sequence, sine_terms: Sequence, period: float, name: str = "A"
    ) -> "MatrixFunction":
        """A(t) = C_0 + sum_k (C_k cos(k w t) + S_k sin(k w t)), w = 2 pi / T."""
        base = jnp.asarray(np.asarray(mean))
        cosines = jnp.asarray(np.asarray(cosine_terms)).reshape((-1,) + base.shape)
        sines = jnp.asarray(np.asarray(sine_terms)).reshape((-1,) + base.shape)
        if cosines.shape != sines.shape:
            raise DimensionMismatch("cosine and sine terms must pair up")
        frequencies = 2.0 * jnp.pi / period * jnp.arange(1, cosines.shape[0] + 1)

        def evaluate(t):
            phase = t[..., None] * frequencies
            return (
                base
                + jnp.einsum("...k,kij->...ij", jnp.cos(phase), cosines)
                + jnp.einsum("...k,kij->...ij", jnp.sin(phase), sines)
            )

        return cls(evaluate, base.shape[0], period=period, name=name)

    def _combine(self, other: "MatrixFunction", sign: float) -> "MatrixFunction":
        if not isinstance(other, MatrixFunction):
            return NotImplemented
        if other.dim != self.dim:
            raise DimensionMismatch(f"cannot add {self.dim}x{self.dim} and {other.dim}x{other.dim}")
        degree = None
        if self.degree is not None and other.degree is not None:
            degree = max(self.degree, other.degree)
        return MatrixFunction(
            lambda t: self._fn(t) + sign * other._fn(t),
            self.dim,
            period=_common_period(self, other),
            degree=degree,
            constant=self.constant and other.constant,
            traceable=self.traceable and other.traceable,
            name=f"{self.name}{'+' if sign > 0 else '-'}{other.name}",
        )

    def __add__(self, other):
        return self._combine(other, 1.0)

    def __sub__(self, other):
        return self._combine(other, -1.0)

    def __mul__(self, scalar) -> "MatrixFunction":
        return MatrixFunction(
            lambda t: scalar * self._fn(t),
            self.dim,
            period=self.period,
            degree=self.degree,
            constant=self.constant,
            traceable=self.traceable,
            name=f"{scalar:g}*{self.name}",
        )

    __rmul__ = __mul__

    def __neg__(self) -> "MatrixFunction":
        return -1.0 * self

    def commutator(self, other: "MatrixFunction") -> "MatrixFunction":
        """Pointwise [A(t), B(t)]."""
        if other.dim != self.dim:
            raise DimensionMismatch(f"commutator of {self.dim} and {other.dim} matrices")

        def evaluate(t):
            a, b = self._fn(t), other._fn(t)
            return a @ b - b @ a

        degree = None
        if self.degree is not None and other.degree is not None:
            degree = self.degree + other.degree
        return MatrixFunction(
            evaluate,
            self.dim,
            period=_common_period(self, other),
            degree=degree,
            constant=self.constant and other.constant,
            traceable=self.traceable and other.traceable,
            name=f"[{self.name},{other.name}]",
        )

    def antiderivative(self, quad) -> "MatrixFunction":
        """t -> integral of A over [0, t], by `quad` scaled to [0, t]."""
        if self.constant:
            return MatrixFunction(
                lambda t: t[..., None, None] * self._fn(t),
                self.dim,
                degree=1,
                traceable=self.traceable,
                name=f"t*{self.name}",
            )
        nodes, weights = quad.unit()
        nodes, weights = jnp.asarray(nodes), jnp.asarray(weights)

        def evaluate(t):
            values = self._fn(t[..., None] * nodes)
            return t[..., None, None] * jnp.sum(values * weights[:, None, None], axis=-3)

        return MatrixFunction(
            evaluate,
            self.dim,
            degree=None if self.degree is None else self.degree + 1,
            traceable=self.traceable,
            name=f"int({self.name})",
        )

    def prelie(self, other: "MatrixFunction", quad) -> "MatrixFunction":
        """(F |> G)(t) = [integral of F over [0, t], G(t)]."""
        return self.antiderivative(quad).commutator(other)

    def average(self, period: float, rule) -> np.ndarray:
        """(1/T) * integral of A over one period."""
        nodes, weights = rule.unit()
        return np.einsum("q,qij->ij", weights, self.at(period * nodes))

    def __repr__(self) -> str:
        return f"MatrixFunction({self.name}, d={self.dim}, T={self.period})"
