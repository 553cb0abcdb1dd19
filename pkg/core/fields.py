"""
Time-dependent vector fields f(x, t) on R^d.

Fields are lazy expression trees evaluated through jax. Jets of any node come
from forward-mode differentiation through the whole tree, so nested brackets
are exact to roundoff. Evaluation broadcasts: x has shape (..., d) and t any
shape broadcastable against the batch shape of x.
"""

import math
from typing import Callable, Iterable, Optional, Sequence, Tuple

import jax
import jax.numpy as jnp
import numpy as np

from core.config import settings
from core.exceptions import DimensionMismatch, JetOrderExceeded

FieldFunction = Callable[[jnp.ndarray, jnp.ndarray], jnp.ndarray]

PERIOD_RTOL = 1e-12
NAME_LIMIT = 60


def short_name(text: str) -> str:
    return text if len(text) <= NAME_LIMIT else text[: NAME_LIMIT - 3] + "..."


def same_period(first: float, second: float) -> bool:
    return abs(first - second) <= PERIOD_RTOL * max(abs(first), abs(second))


def common_period(fields: Sequence["FieldHandle"]) -> Optional[float]:
    """Period shared by the time-dependent members, None if any disagrees."""
    periods = [f.period for f in fields if not f.autonomous]
    if not periods:
        declared = [f.period for f in fields if f.period is not None]
        return declared[0] if declared else None
    first = periods[0]
    if first is None:
        return None
    for period in periods[1:]:
        if period is None or not same_period(first, period):
            return None
    return first


class FieldHandle:
    """
    A vector field f(x, t) on R^d, optionally declared T-periodic in t.

    `fn` receives x and t already broadcast to a common batch shape (autonomous
    fields receive t untouched and must ignore it). Handles are immutable.
    """

    def __init__(
        self,
        fn: Optional[FieldFunction],
        domain_dim: int,
        period: Optional[float] = None,
        autonomous: bool = False,
        jet_capacity: Optional[int] = None,
        traceable: bool = True,
        name: str = "f",
    ):
        if domain_dim < 1:
            raise DimensionMismatch(f"domain dimension must be positive, got {domain_dim}")
        if period is not None and not period > 0:
            raise ValueError(f"period must be positive, got {period}")
        self._fn = fn
        self.domain_dim = int(domain_dim)
        self.period = None if period is None else float(period)
        self.autonomous = bool(autonomous)
        self.jet_capacity = (
            settings.MAX_JET_ORDER if jet_capacity is None else int(jet_capacity)
        )
        self.traceable = traceable
        self.name = name

    def __call__(self, x, t=0.0) -> jnp.ndarray:
        x = jnp.asarray(x, dtype=jnp.float64)
        if x.ndim == 0 or x.shape[-1] != self.domain_dim:
            raise DimensionMismatch(
                f"{self.name} expects states of dimension {self.domain_dim}, got shape {x.shape}"
            )
        return self._evaluate(x, jnp.asarray(t, dtype=jnp.float64))

    def _evaluate(self, x: jnp.ndarray, t: jnp.ndarray) -> jnp.ndarray:
        if self.autonomous:
            return self._fn(x, t)
        batch = jnp.broadcast_shapes(x.shape[:-1], t.shape)
        return self._fn(
            jnp.broadcast_to(x, batch + (self.domain_dim,)), jnp.broadcast_to(t, batch)
        )

    def batch_shape(self, x: jnp.ndarray, t: jnp.ndarray) -> Tuple[int, ...]:
        if self.autonomous:
            return tuple(x.shape[:-1])
        return tuple(jnp.broadcast_shapes(x.shape[:-1], t.shape))

    @classmethod
    def zero(cls, domain_dim: int, period: Optional[float] = None) -> "FieldHandle":
        return cls(
            lambda x, t: jnp.zeros_like(x),
            domain_dim,
            period=period,
            autonomous=True,
            name="0",
        )

    def __add__(self, other: "FieldHandle") -> "FieldHandle":
        return LinearCombination.of([(1.0, self), (1.0, other)])

    def __sub__(self, other: "FieldHandle") -> "FieldHandle":
        return LinearCombination.of([(1.0, self), (-1.0, other)])

    def __mul__(self, scalar: float) -> "FieldHandle":
        return LinearCombination.of([(float(scalar), self)])

    __rmul__ = __mul__

    def __neg__(self) -> "FieldHandle":
        return LinearCombination.of([(-1.0, self)])

    def __repr__(self) -> str:
        return f"{type(self).__name__}({self.name}, d={self.domain_dim}, T={self.period})"


class LinearCombination(FieldHandle):
    """Sum of scaled fields; nested combinations are flattened."""

    def __init__(self, terms: Sequence[Tuple[float, FieldHandle]], domain_dim: int):
        self.terms = tuple(terms)
        fields = [f for _, f in self.terms]
        super().__init__(
            None,
            domain_dim,
            period=common_period(fields),
            autonomous=all(f.autonomous for f in fields),
            jet_capacity=min(
                (f.jet_capacity for f in fields), default=settings.MAX_JET_ORDER
            ),
            traceable=all(f.traceable for f in fields),
            name=short_name(" + ".join(f"{c:g}*{f.name}" for c, f in self.terms) or "0"),
        )

    @classmethod
    def of(
        cls, pairs: Iterable[Tuple[float, FieldHandle]], domain_dim: Optional[int] = None
    ) -> "LinearCombination":
        flat = []
        for coefficient, field in pairs:
            if not isinstance(field, FieldHandle):
                raise TypeError(f"cannot combine {type(field).__name__} with a field")
            if domain_dim is None:
                domain_dim = field.domain_dim
            elif field.domain_dim != domain_dim:
                raise DimensionMismatch(
                    f"cannot combine fields of dimension {domain_dim} and {field.domain_dim}"
                )
            if isinstance(field, LinearCombination):
                flat.extend((coefficient * c, f) for c, f in field.terms)
            else:
                flat.append((coefficient, field))
        if domain_dim is None:
            raise DimensionMismatch("empty combination needs an explicit dimension")
        return cls([(c, f) for c, f in flat if c != 0.0], domain_dim)

    def _evaluate(self, x, t):
        total = None
        for coefficient, field in self.terms:
            value = coefficient * field._evaluate(x, t)
            total = value if total is None else total + value
        if total is None:
            return jnp.zeros_like(x)
        return total


class TimeScaled(FieldHandle):
    """t * f(x) for an autonomous f, its exact antiderivative from zero."""

    def __init__(self, field: FieldHandle):
        super().__init__(
            None,
            field.domain_dim,
            jet_capacity=field.jet_capacity,
            traceable=field.traceable,
            name=short_name(f"t*{field.name}"),
        )
        self.field = field

    def _evaluate(self, x, t):
        return t[..., None] * self.field._evaluate(x, t)


class TimeIntegral(FieldHandle):
    """(x, t) -> integral of f(x, tau) over [0, t] with a fixed rule scaled to [0, t]."""

    def __init__(self, integrand: FieldHandle, nodes: np.ndarray, weights: np.ndarray):
        super().__init__(
            None,
            integrand.domain_dim,
            jet_capacity=integrand.jet_capacity,
            traceable=integrand.traceable,
            name=short_name(f"int({integrand.name})"),
        )
        self.integrand = integrand
        self._nodes = jnp.asarray(nodes)
        self._weights = jnp.asarray(weights)

    def _evaluate(self, x, t):
        values = self.integrand._evaluate(x[..., None, :], t[..., None] * self._nodes)
        return t[..., None] * jnp.sum(values * self._weights[:, None], axis=-2)


class FourierAntiderivative(FieldHandle):
    """
    Zero-mean T-periodic antiderivative of a zero-mean field.

    Built from 2K+1 equispaced samples t_n; with omega = 2*pi/T the kernel
    (2/N) * sum_k sin(k*omega*(t - t_n)) / (k*omega) divides each Fourier
    coefficient by i*k*omega. Exact for trigonometric degree <= K.
    """

    def __init__(self, integrand: FieldHandle, period: float, modes: int):
        super().__init__(
            None,
            integrand.domain_dim,
            period=period,
            jet_capacity=integrand.jet_capacity,
            traceable=integrand.traceable,
            name=short_name(f"dinv({integrand.name})"),
        )
        self.integrand = integrand
        samples = 2 * modes + 1
        self._count = samples
        self._samples = jnp.asarray(period * np.arange(samples) / samples)
        self._frequencies = jnp.asarray(2.0 * np.pi / period * np.arange(1, modes + 1))

    def _evaluate(self, x, t):
        values = self.integrand._evaluate(x[..., None, :], self._samples)
        phase = (t[..., None, None] - self._samples[:, None]) * self._frequencies
        kernel = (2.0 / self._count) * jnp.sum(
            jnp.sin(phase) / self._frequencies, axis=-1
        )
        return jnp.sum(values * kernel[..., None], axis=-2)


class PeriodAverage(FieldHandle):
    """Autonomous field X -> (1/T) * integral of f(X, t) over one period."""

    def __init__(
        self, integrand: FieldHandle, period: float, nodes: np.ndarray, weights: np.ndarray
    ):
        super().__init__(
            None,
            integrand.domain_dim,
            period=period,
            autonomous=True,
            jet_capacity=integrand.jet_capacity,
            traceable=integrand.traceable,
            name=short_name(f"<{integrand.name}>"),
        )
        self.integrand = integrand
        self._times = jnp.asarray(period * np.asarray(nodes))
        self._weights = jnp.asarray(weights)

    def _evaluate(self, x, t):
        values = self.integrand._evaluate(x[..., None, :], self._times)
        return jnp.sum(values * self._weights[:, None], axis=-2)


def jacobian(field: FieldHandle, x: jnp.ndarray, t: jnp.ndarray) -> jnp.ndarray:
    """d f_i / d x_k as an array of shape (..., d, d) at the field's own batch."""
    d = field.domain_dim
    own = field.batch_shape(x, t)
    points = jnp.broadcast_to(
        jnp.broadcast_to(x, own + (d,))[..., None, :], own + (d, d)
    )
    directions = jnp.broadcast_to(jnp.eye(d), own + (d, d))
    times = t if field.autonomous else jnp.broadcast_to(t, own)[..., None]
    columns = jax.jvp(lambda y: field._evaluate(y, times), (points,), (directions,))[1]
    return jnp.swapaxes(columns, -1, -2)


def directional_derivative(
    field: FieldHandle, x: jnp.ndarray, t: jnp.ndarray, v: jnp.ndarray
) -> jnp.ndarray:
    """f'(x, t) v over the broadcast batch of x, t and v."""
    d = field.domain_dim
    own = field.batch_shape(x, t)
    full = tuple(jnp.broadcast_shapes(own, v.shape[:-1]))
    # A field evaluated on a smaller batch than v (autonomous nodes under a
    # quadrature) is differentiated once per coordinate instead of per point.
    if d * math.prod(own) < math.prod(full):
        return jnp.sum(jacobian(field, x, t) * v[..., None, :], axis=-1)
    points = jnp.broadcast_to(x, full + (d,))
    directions = jnp.broadcast_to(v, full + (d,))
    return jax.jvp(lambda y: field._evaluate(y, t), (points,), (directions,))[1]


class LieBracket(FieldHandle):
    """[P, Q] = P'Q - Q'P."""

    def __init__(self, left: FieldHandle, right: FieldHandle):
        if left.domain_dim != right.domain_dim:
            raise DimensionMismatch(
                f"bracket of fields of dimension {left.domain_dim} and {right.domain_dim}"
            )
        capacity = min(left.jet_capacity, right.jet_capacity) - 1
        if capacity < 0:
            raise JetOrderExceeded(
                f"[{left.name}, {right.name}] needs one more derivative than available"
            )
        super().__init__(
            None,
            left.domain_dim,
            period=common_period([left, right]),
            autonomous=left.autonomous and right.autonomous,
            jet_capacity=capacity,
            traceable=left.traceable and right.traceable,
            name=short_name(f"[{left.name}, {right.name}]"),
        )
        self.left = left
        self.right = right

    def _evaluate(self, x, t):
        p = self.left._evaluate(x, t)
        q = self.right._evaluate(x, t)
        return directional_derivative(self.left, x, t, q) - directional_derivative(
            self.right, x, t, p
        )


class SeriesEvaluator:
    """
    Compiled evaluation of sum_j w_j f_j(x, t) with the weights w supplied per call.

    Weights are traced, so epsilon sweeps and frozen times reuse one compilation.
    """

    def __init__(self, fields: Sequence[FieldHandle]):
        self.fields = tuple(fields)
        if not self.fields:
            raise ValueError("a series needs at least one field")
        self.domain_dim = self.fields[0].domain_dim
        self.traceable = all(f.traceable for f in self.fields)
        self._compiled = jax.jit(self._evaluate) if self.traceable else self._evaluate

    def _evaluate(self, x, t, weights):
        total = jnp.zeros_like(x)
        for j, field in enumerate(self.fields):
            total = total + weights[j] * field(x, t)
        return total

    def __call__(self, x, t, weights) -> np.ndarray:
        return np.asarray(
            self._compiled(
                jnp.asarray(x, dtype=jnp.float64),
                jnp.asarray(t, dtype=jnp.float64),
                jnp.asarray(weights, dtype=jnp.float64),
            )
        )

    def rhs(
        self, weights: Sequence[float], frozen_time: Optional[float] = None
    ) -> Callable[[float, np.ndarray], np.ndarray]:
        """Right-hand side (t, y) -> sum_j w_j f_j(y, t), optionally at a frozen time."""
        weights = np.asarray(weights, dtype=float)
        if len(weights) != len(self.fields):
            raise DimensionMismatch(
                f"{len(self.fields)} fields but {len(weights)} weights"
            )
        if frozen_time is None:
            return lambda t, y: self(y, t, weights)
        return lambda t, y: self(y, frozen_time, weights)
