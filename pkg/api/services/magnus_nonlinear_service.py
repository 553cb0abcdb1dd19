"""
Service layer for the nonlinear Magnus generator W(x, t) and flow reconstruction.
"""

import logging
from typing import Optional

import numpy as np

from api.services.field_service import FieldService
from api.services.odeint_service import OdeintService
from core.config import settings
from core.exceptions import OrderExceeded
from core.fields import FieldHandle
from core.words import MAX_WORD_ORDER, magnus_rates
from schemas.fields import AntiderivativeMode, QuadratureRule
from schemas.integrator import IntegratorConfig
from schemas.magnus import FlowResult, GeneratorSeries

logger = logging.getLogger(__name__)


class MagnusNonlinearService:
    """Service class for the nonlinear Magnus expansion."""

    @staticmethod
    def generator_terms(
        g: FieldHandle, n: int, quad: Optional[QuadratureRule] = None
    ) -> GeneratorSeries:
        """W_1..W_n of x' = eps g(x, t), with W_j = integral of R_j from 0."""
        if not 1 <= n <= MAX_WORD_ORDER:
            raise OrderExceeded(f"generator order {n} outside 1..{MAX_WORD_ORDER}")
        quad = quad or QuadratureRule()
        mode = AntiderivativeMode.from_zero()
        rates = magnus_rates(g, lambda p, q: FieldService.prelie(p, q, mode, quad), n)
        terms = [FieldService.antiderivative(rate, mode, quad) for rate in rates]
        logger.info("Magnus generator of %s through order %d", g.name, n)
        return GeneratorSeries(terms=terms, rates=rates)

    @staticmethod
    def reconstruct_state(
        w: GeneratorSeries,
        x0,
        t_star: float,
        tol: Optional[float] = None,
        eps: Optional[float] = None,
        order: Optional[int] = None,
    ) -> FlowResult:
        """y(1) of dy/ds = W(y, t_star), y(0) = x0, approximating x(t_star)."""
        order = w.order if order is None else order
        if not 1 <= order <= w.order:
            raise OrderExceeded(f"order {order} outside 1..{w.order}")
        weights = [c if j < order else 0.0 for j, c in enumerate(w.weights(eps))]
        rhs = w.evaluator.rhs(weights, frozen_time=t_star)
        cfg = IntegratorConfig.with_tolerance(tol or settings.ODE_TOL)
        trajectory = OdeintService.integrate(rhs, np.asarray(x0, dtype=float), 0.0, 1.0, cfg)
        logger.debug(
            "Reconstructed x(%g) with %d s-steps", t_star, trajectory.meta.steps
        )
        return FlowResult(
            state=trajectory.final_state, s_trajectory=trajectory, order_used=order
        )
