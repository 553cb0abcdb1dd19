"""
Service layer for stroboscopic averaging of T-periodic systems and the linear
Floquet-Magnus factorisation.
"""

import logging
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.linalg import expm

from api.services.field_service import FieldService
from api.services.magnus_nonlinear_service import MagnusNonlinearService
from api.services.odeint_service import OdeintService
from core.config import settings
from core.exceptions import NotPeriodic, OrderExceeded
from core.fields import FieldHandle
from core.matrices import MatrixFunction
from core.words import series_coefficient
from schemas.fields import AntiderivativeMode, QuadratureRule
from schemas.floquet import AveragedSystem, FloquetLinearResult
from schemas.integrator import IntegratorConfig, Trajectory
from schemas.magnus import summed_matrices

logger = logging.getLogger(__name__)

MAX_AVERAGING_ORDER = 3


def _check_order(n: int) -> None:
    if not 1 <= n <= MAX_AVERAGING_ORDER:
        raise OrderExceeded(f"averaging order {n} outside 1..{MAX_AVERAGING_ORDER}")


class FloquetService:
    """Service class for high-order averaging."""

    @staticmethod
    def averaged_terms(
        g: FieldHandle,
        n: int,
        quad: Optional[QuadratureRule] = None,
        average_rule: Optional[QuadratureRule] = None,
        period: Optional[float] = None,
    ) -> AveragedSystem:
        """
        G_j, R_j and W_j for x' = eps g(x, t) through order n.

        U_j collects everything of order j in the transported series except
        R_j and G_j; then G_j = <U_j> and R_j = U_j - G_j.
        """
        _check_order(n)
        period = FieldService._resolve_period(g, period)
        quad = quad or QuadratureRule.trigonometric()
        mode = AntiderivativeMode.from_zero()

        def rhd(p, q):
            return FieldService.prelie(p, q, mode, quad)

        zero = FieldHandle.zero(g.domain_dim, period)
        r_terms: List[FieldHandle] = []
        g_terms: List[FieldHandle] = []
        for j in range(1, n + 1):
            if j == 1:
                u = g
            else:
                u = -1.0 * series_coefficient(r_terms, g_terms, j, rhd, zero)
            averaged = FieldService.average(u, period, average_rule)
            g_terms.append(averaged)
            r_terms.append(u - averaged)

        w_terms = [FieldService.antiderivative(r, mode, quad) for r in r_terms]
        logger.info("Averaged %s through order %d over T=%g", g.name, n, period)
        return AveragedSystem(
            g_terms=g_terms, r_terms=r_terms, w_terms=w_terms, period=period
        )

    @staticmethod
    def averaged_terms_explicit(
        g: FieldHandle,
        period: Optional[float] = None,
        quad: Optional[QuadratureRule] = None,
        average_rule: Optional[QuadratureRule] = None,
    ) -> Tuple[FieldHandle, FieldHandle, FieldHandle]:
        """
        G_1 = <g>, G_2 = -1/2 <g|>g>, G_3 = <1/4 (g|>g)|>g + 1/12 g|>(g|>g)>.
        """
        period = FieldService._resolve_period(g, period)
        quad = quad or QuadratureRule.trigonometric()
        mode = AntiderivativeMode.from_zero()

        def rhd(p, q):
            return FieldService.prelie(p, q, mode, quad)

        def average(f):
            return FieldService.average(f, period, average_rule)

        gg = rhd(g, g)
        return (
            average(g),
            average(-0.5 * gg),
            average(0.25 * rhd(gg, g) + (1.0 / 12.0) * rhd(g, gg)),
        )

    @staticmethod
    def stroboscopic_times(period: float, t_end: float) -> List[float]:
        """0, T, 2T, ... up to t_end, closed by t_end itself."""
        if t_end < 0:
            raise ValueError(f"t_end must be non-negative, got {t_end}")
        count = int(np.floor(t_end / period + 1e-12))
        times = [k * period for k in range(count + 1) if k * period <= t_end]
        if abs(times[-1] - t_end) > 1e-12 * max(1.0, t_end):
            times.append(float(t_end))
        return times

    @staticmethod
    def stroboscopic_solve(
        system: AveragedSystem,
        x0,
        t_end: float,
        eps: float,
        tol: Optional[float] = None,
        order: Optional[int] = None,
        times: Optional[Sequence[float]] = None,
    ) -> Trajectory:
        """X' = sum_j eps^j G_j(X), X(0) = x0, stored at multiples of T unless times are given."""
        if t_end < 0:
            raise ValueError(f"t_end must be non-negative, got {t_end}")
        if times is None:
            times = FloquetService.stroboscopic_times(system.period, t_end)
        rhs = system.averaged_evaluator.rhs(system.weights(eps, order))
        cfg = IntegratorConfig.with_tolerance(tol or settings.ODE_TOL, dense_output=list(times))
        return OdeintService.integrate(rhs, np.asarray(x0, dtype=float), 0.0, t_end, cfg)

    @staticmethod
    def change_of_variables(
        system: AveragedSystem,
        x,
        t: float,
        eps: float,
        tol: Optional[float] = None,
        order: Optional[int] = None,
    ) -> np.ndarray:
        """x = Psi_1(X, t): the s-flow of the frozen generator W(., t) from X."""
        rhs = system.generator_evaluator.rhs(system.weights(eps, order), frozen_time=t)
        cfg = IntegratorConfig.with_tolerance(tol or settings.ODE_TOL)
        trajectory = OdeintService.integrate(rhs, np.asarray(x, dtype=float), 0.0, 1.0, cfg)
        return trajectory.final_state

    @staticmethod
    def floquet_linear(
        a: MatrixFunction,
        n: int,
        quad: Optional[QuadratureRule] = None,
        average_rule: Optional[QuadratureRule] = None,
    ) -> FloquetLinearResult:
        """Lambda_k and F_k with Y(t) = exp(Lambda(t)) exp(t F) for T-periodic A."""
        _check_order(n)
        if a.period is None:
            raise NotPeriodic(f"{a.name} declares no period")
        period = a.period
        quad = quad or QuadratureRule.trigonometric()
        average_rule = average_rule or QuadratureRule.trigonometric()

        def rhd(p, q):
            return p.prelie(q, quad)

        zero = MatrixFunction.from_constant(np.zeros((a.dim, a.dim)), period)
        lambda_rates: List[MatrixFunction] = []
        constants: List[MatrixFunction] = []
        f_terms: List[np.ndarray] = []
        for j in range(1, n + 1):
            if j == 1:
                u = a
            else:
                u = -1.0 * series_coefficient(lambda_rates, constants, j, rhd, zero)
            f_j = u.average(period, average_rule)
            f_terms.append(f_j)
            constants.append(MatrixFunction.from_constant(f_j, period, name=f"F_{j}"))
            lambda_rates.append(u - constants[-1])

        logger.info("Floquet-Magnus terms of %s through order %d", a.name, n)
        return FloquetLinearResult(
            lambda_terms=[rate.antiderivative(quad) for rate in lambda_rates],
            lambda_rates=lambda_rates,
            f_terms=f_terms,
            period=period,
        )

    @staticmethod
    def floquet_propagator(result: FloquetLinearResult, t: float, eps: float) -> np.ndarray:
        """exp(sum_k eps^k Lambda_k(t)) exp(t sum_k eps^k F_k)."""
        lam = summed_matrices([term.at(t) for term in result.lambda_terms], eps)
        exponent = summed_matrices(result.f_terms, eps)
        return expm(lam) @ expm(t * exponent)

    @staticmethod
    def generator_period_check(
        g: FieldHandle,
        n: int,
        quad: Optional[QuadratureRule] = None,
        average_rule: Optional[QuadratureRule] = None,
        points=None,
    ) -> float:
        """Largest |G_j(X) - W_j(X, T) / T| over j <= n and the probe points."""
        _check_order(n)
        quad = quad or QuadratureRule.trigonometric()
        system = FloquetService.averaged_terms(g, n, quad, average_rule)
        generator = MagnusNonlinearService.generator_terms(g, n, quad)
        if points is None:
            points = np.random.default_rng(0).uniform(-1.0, 1.0, size=(5, g.domain_dim))
        points = np.asarray(points, dtype=float)
        discrepancy = 0.0
        for averaged, w in zip(system.g_terms, generator.terms):
            expected = np.asarray(w(points, system.period)) / system.period
            actual = np.asarray(averaged(points, 0.0))
            discrepancy = max(discrepancy, float(np.max(np.abs(actual - expected))))
        return discrepancy
