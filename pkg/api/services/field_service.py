"""
Service layer for vector-field operations: jets, brackets, antiderivatives and
the pre-Lie product.
"""

import logging
from typing import List, Optional, Sequence, Union

import jax
import jax.numpy as jnp
import numpy as np

from core.config import settings
from core.exceptions import (
    DimensionMismatch,
    JetOrderExceeded,
    NonZeroMean,
    NotPeriodic,
    OrderExceeded,
)
from core.fields import (
    FieldHandle,
    FourierAntiderivative,
    LieBracket,
    LinearCombination,
    PeriodAverage,
    TimeIntegral,
    TimeScaled,
    same_period,
)
from core.matrices import MatrixFunction
from core.words import series_coefficients
from schemas.fields import AntiderivativeMode, JetValue, QuadratureRule, SeriesTerms

logger = logging.getLogger(__name__)

ZERO_MEAN_RTOL = 1e-8
PROBE_POINTS = 3


class FieldService:
    """Service class for vector-field operations."""

    @staticmethod
    def eval_field(f: FieldHandle, x, t: float = 0.0, k: int = 0) -> JetValue:
        """Value and x-derivatives up to order k of f at one point."""
        x = np.asarray(x, dtype=float)
        if x.ndim != 1 or x.shape[0] != f.domain_dim:
            raise DimensionMismatch(
                f"{f.name} expects a state of dimension {f.domain_dim}, got shape {x.shape}"
            )
        if k < 0:
            raise ValueError(f"jet order must be non-negative, got {k}")
        if k > settings.MAX_JET_ORDER or k > f.jet_capacity:
            raise JetOrderExceeded(
                f"jet order {k} exceeds the available {min(settings.MAX_JET_ORDER, f.jet_capacity)}"
            )
        if k > 0 and not f.traceable:
            raise JetOrderExceeded(f"{f.name} is not differentiable through jax")

        point = jnp.asarray(x)
        value = np.asarray(f(point, t))
        derivs: List[np.ndarray] = []

        def current(y):
            return f(y, t)

        for _ in range(k):
            current = jax.jacfwd(current)
            derivs.append(np.asarray(current(point)))
        return JetValue(value=value, derivs=derivs)

    @staticmethod
    def lie_bracket(p: FieldHandle, q: FieldHandle) -> FieldHandle:
        """[P, Q] = P'Q - Q'P."""
        return LieBracket(p, q)

    @staticmethod
    def antiderivative(
        f: FieldHandle,
        mode: Optional[AntiderivativeMode] = None,
        quad: Optional[QuadratureRule] = None,
    ) -> FieldHandle:
        """Integral of f from t = 0, or its zero-mean periodic antiderivative."""
        mode = mode or AntiderivativeMode.from_zero()
        if mode.is_fourier:
            return FieldService._fourier_antiderivative(f, mode)

        quad = quad or QuadratureRule()
        if isinstance(f, LinearCombination):
            return LinearCombination.of(
                [(c, FieldService.antiderivative(g, mode, quad)) for c, g in f.terms],
                f.domain_dim,
            )
        if f.autonomous:
            return TimeScaled(f)
        nodes, weights = quad.unit()
        return TimeIntegral(f, nodes, weights)

    @staticmethod
    def _fourier_antiderivative(f: FieldHandle, mode: AntiderivativeMode) -> FieldHandle:
        period = FieldService._resolve_period(f, mode.period)
        FieldService.check_zero_mean(f, period)
        if f.autonomous:
            return FieldHandle.zero(f.domain_dim, period)
        return FourierAntiderivative(f, period, mode.modes)

    @staticmethod
    def _resolve_period(f: FieldHandle, period: Optional[float]) -> float:
        if period is None:
            period = f.period
        if period is None:
            raise NotPeriodic(f"{f.name} declares no period")
        if not f.autonomous and f.period is not None and not same_period(period, f.period):
            raise NotPeriodic(f"{f.name} has period {f.period}, not {period}")
        return float(period)

    @staticmethod
    def check_zero_mean(
        f: FieldHandle, period: float, rule: Optional[QuadratureRule] = None
    ) -> float:
        """
        Largest time average of f over one period at fixed probe points.

        Raises NonZeroMean when it exceeds 1e-8 relative to the sampled size of f.
        """
        rule = rule or QuadratureRule.trigonometric()
        nodes, weights = rule.unit()
        rng = np.random.default_rng(0)
        probes = rng.uniform(-0.5, 0.5, size=(PROBE_POINTS, f.domain_dim))
        values = np.broadcast_to(
            np.asarray(f(probes[:, None, :], period * nodes)),
            (PROBE_POINTS, nodes.shape[0], f.domain_dim),
        )
        mean = np.einsum("q,pqi->pi", weights, values)
        scale = float(np.max(np.abs(values))) if values.size else 0.0
        largest = float(np.max(np.abs(mean)))
        if largest > ZERO_MEAN_RTOL * max(1.0, scale):
            raise NonZeroMean(f"{f.name} has time average of size {largest:.3e} over T={period}")
        return largest

    @staticmethod
    def average(
        f: FieldHandle,
        period: Optional[float] = None,
        rule: Optional[QuadratureRule] = None,
    ) -> FieldHandle:
        """The autonomous field X -> (1/T) * integral of f(X, t) over [0, T]."""
        if isinstance(f, LinearCombination):
            return LinearCombination.of(
                [(c, FieldService.average(g, period, rule)) for c, g in f.terms],
                f.domain_dim,
            )
        if f.autonomous:
            return f
        period = FieldService._resolve_period(f, period)
        rule = rule or QuadratureRule.trigonometric()
        nodes, weights = rule.unit()
        return PeriodAverage(f, period, nodes, weights)

    @staticmethod
    def prelie(
        p: FieldHandle,
        q: FieldHandle,
        mode: Optional[AntiderivativeMode] = None,
        quad: Optional[QuadratureRule] = None,
    ) -> FieldHandle:
        """P |> Q = [antiderivative(P), Q]."""
        return LieBracket(FieldService.antiderivative(p, mode, quad), q)

    @staticmethod
    def prelie_identity_residual(
        f: FieldHandle,
        g: FieldHandle,
        h: FieldHandle,
        x,
        t: float,
        mode: Optional[AntiderivativeMode] = None,
        quad: Optional[QuadratureRule] = None,
    ) -> float:
        """Norm of the associator difference (F,G,H) - (G,F,H) at (x, t)."""

        def rhd(a, b):
            return FieldService.prelie(a, b, mode, quad)

        x = np.asarray(x, dtype=float)
        fgh = np.asarray(rhd(f, rhd(g, h))(x, t))
        fg_h = np.asarray(rhd(rhd(f, g), h)(x, t))
        gfh = np.asarray(rhd(g, rhd(f, h))(x, t))
        gf_h = np.asarray(rhd(rhd(g, f), h)(x, t))
        return float(np.linalg.norm((fgh - fg_h) - (gfh - gf_h)))

    @staticmethod
    def transport_coefficients(
        r: Union[SeriesTerms, Sequence[FieldHandle]],
        f: Union[FieldHandle, SeriesTerms, Sequence[FieldHandle], None],
        order: int,
        mode: Optional[AntiderivativeMode] = None,
        quad: Optional[QuadratureRule] = None,
    ) -> SeriesTerms:
        """
        Coefficients V_1..V_order of
        sum_m 1/m! R|>...|>R + sum_m 1/m! R|>...|>R|>F.

        A single field F counts as an order-one forcing term.
        """
        rates = list(r.terms if isinstance(r, SeriesTerms) else r)
        if order < 1 or len(rates) < order:
            raise OrderExceeded(f"order {order} needs rates R_1..R_{order}, got {len(rates)}")
        if f is None:
            forcing = []
        elif isinstance(f, FieldHandle):
            forcing = [f]
        else:
            forcing = list(f.terms if isinstance(f, SeriesTerms) else f)
        d = rates[0].domain_dim

        def rhd(a, b):
            return FieldService.prelie(a, b, mode, quad)

        coefficients = series_coefficients(
            rates[:order], forcing[:order], order, rhd, FieldHandle.zero(d)
        )
        return SeriesTerms(role="V", terms=coefficients)

    @staticmethod
    def transport_rhs(
        r: Union[SeriesTerms, Sequence[FieldHandle]],
        f: Union[FieldHandle, SeriesTerms, Sequence[FieldHandle], None],
        order: int,
        mode: Optional[AntiderivativeMode] = None,
        quad: Optional[QuadratureRule] = None,
        eps: float = 1.0,
    ) -> FieldHandle:
        """Transported field summed through order `order` with weights eps^j."""
        coefficients = FieldService.transport_coefficients(r, f, order, mode, quad)
        return coefficients.summed(eps)

    @staticmethod
    def linear_field(a: MatrixFunction) -> FieldHandle:
        """x -> A(t) x for a real matrix function A."""
        if np.iscomplexobj(a.at(0.0)):
            raise ValueError("linear fields need a real matrix function")
        if a.constant:
            matrix = jnp.asarray(a.at(0.0))
            return FieldHandle(
                lambda x, t: x @ matrix.T,
                a.dim,
                period=a.period,
                autonomous=True,
                traceable=a.traceable,
                name=f"{a.name}x",
            )
        return FieldHandle(
            lambda x, t: jnp.einsum("...ij,...j->...i", a(t), x),
            a.dim,
            period=a.period,
            traceable=a.traceable,
            name=f"{a.name}(t)x",
        )

    @staticmethod
    def finite_difference_jacobian(
        f: FieldHandle, x, t: float = 0.0, step: float = 1e-5
    ) -> np.ndarray:
        """Central-difference Jacobian, shape (d, d)."""
        x = np.asarray(x, dtype=float)
        shifts = step * np.eye(f.domain_dim)
        forward = np.asarray(f(x + shifts, t))
        backward = np.asarray(f(x - shifts, t))
        return ((forward - backward) / (2.0 * step)).T
