"""
Service layer for the reference Dormand-Prince 5(4) integrator.
"""

import logging
from typing import Callable, List, Optional

import numpy as np

from core.exceptions import (
    DimensionMismatch,
    MaxStepsExceeded,
    NonFiniteState,
    StepSizeUnderflow,
)
from core.fields import FieldHandle, SeriesEvaluator
from schemas.integrator import IntegrationStats, IntegratorConfig, Trajectory

logger = logging.getLogger(__name__)

RightHandSide = Callable[[float, np.ndarray], np.ndarray]

# Dormand-Prince tableau; stage 7 sits at the new point (FSAL)
NODES = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
TABLEAU = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
WEIGHTS = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
ERROR_WEIGHTS = np.array(
    [71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40]
)

SAFETY = 0.9
MIN_FACTOR = 0.2
MAX_FACTOR = 10.0
# PI controller exponents
ALPHA = 0.7 / 5
BETA = 0.4 / 5


class OdeintService:
    """Service class for the reference integrator."""

    @staticmethod
    def field_rhs(
        field: FieldHandle, eps: float = 1.0, frozen_time: Optional[float] = None
    ) -> RightHandSide:
        """Compiled right-hand side (t, y) -> eps * f(y, t)."""
        return SeriesEvaluator([field]).rhs([eps], frozen_time=frozen_time)

    @staticmethod
    def _step(rhs: RightHandSide, t: float, y: np.ndarray, f0: np.ndarray, h: float):
        stages = [f0]
        for i in range(1, 7):
            increment = sum(a * k for a, k in zip(TABLEAU[i], stages))
            stages.append(np.asarray(rhs(t + NODES[i] * h, y + h * increment), dtype=float))
        y_new = y + h * sum(b * k for b, k in zip(WEIGHTS, stages))
        error = h * sum(e * k for e, k in zip(ERROR_WEIGHTS, stages))
        return y_new, stages[-1], error

    @staticmethod
    def _initial_step(rhs, t0, y0, f0, cfg: IntegratorConfig, span: float) -> float:
        scale = cfg.abs_tol + cfg.rel_tol * np.abs(y0)
        d0 = np.sqrt(np.mean((y0 / scale) ** 2))
        d1 = np.sqrt(np.mean((f0 / scale) ** 2))
        h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
        h0 = min(h0, span)
        f1 = np.asarray(rhs(t0 + h0, y0 + h0 * f0), dtype=float)
        d2 = np.sqrt(np.mean(((f1 - f0) / scale) ** 2)) / h0
        if max(d1, d2) <= 1e-15:
            h1 = max(1e-6, h0 * 1e-3)
        else:
            h1 = (0.01 / max(d1, d2)) ** (1 / 5)
        return min(100 * h0, h1, span)

    @staticmethod
    def integrate(
        rhs,
        x0,
        t0: float,
        t1: float,
        cfg: Optional[IntegratorConfig] = None,
    ) -> Trajectory:
        """
        Integrate x' = rhs(t, x) from t0 to t1.

        `rhs` is a FieldHandle or a callable (t, x) -> array. Without requested
        output times the trajectory holds every accepted step; otherwise it
        holds exactly the requested times inside [t0, t1].
        """
        cfg = cfg or IntegratorConfig()
        if isinstance(rhs, FieldHandle):
            rhs = OdeintService.field_rhs(rhs)
        y = np.array(x0, dtype=float)
        if y.ndim != 1:
            raise DimensionMismatch(f"initial state must be a vector, got shape {y.shape}")
        if t1 < t0:
            raise ValueError(f"t1={t1} precedes t0={t0}")
        if not np.all(np.isfinite(y)):
            raise NonFiniteState("initial state is not finite", t0)

        requested = [t for t in cfg.dense_output if t0 <= t <= t1]
        stats = IntegrationStats(rel_tol=cfg.rel_tol, abs_tol=cfg.abs_tol)
        t = float(t0)
        f = np.asarray(rhs(t, y), dtype=float)
        stats.evaluations += 1
        times: List[float] = [t]
        states: List[np.ndarray] = [y.copy()]
        slopes: List[np.ndarray] = [f.copy()]

        if t1 > t0:
            if cfg.fixed_steps is not None:
                t, y, f = OdeintService._fixed(
                    rhs, t, y, f, t1, cfg, stats, requested, times, states, slopes
                )
            else:
                OdeintService._adaptive(
                    rhs, t, y, f, t1, cfg, stats, requested, times, states, slopes
                )

        times_array = np.array(times)
        states_array = np.array(states)
        slopes_array = np.array(slopes)
        if requested:
            index = {tt: i for i, tt in enumerate(times)}
            keep = [index[r] for r in requested]
            times_array = np.array(requested)
            states_array = states_array[keep]
            slopes_array = slopes_array[keep]
        logger.debug(
            "Integrated [%g, %g]: %d steps, %d rejected",
            t0,
            t1,
            stats.steps,
            stats.rejected_steps,
        )
        return Trajectory(
            times=times_array, states=states_array, slopes=slopes_array, meta=stats
        )

    @staticmethod
    def _fixed(rhs, t, y, f, t1, cfg, stats, requested, times, states, slopes):
        t0 = t
        h = (t1 - t0) / cfg.fixed_steps
        grid = [t0 + n * h for n in range(1, cfg.fixed_steps)] + [t1]
        # a requested time splits the grid step it falls in
        stops = sorted(set(grid) | {r for r in requested if t0 < r < t1})
        for stop in stops:
            y, f, _ = OdeintService._step(rhs, t, y, f, stop - t)
            stats.evaluations += 6
            if not np.all(np.isfinite(y)):
                raise NonFiniteState(f"state became non-finite near t={t}", t)
            t = stop
            stats.steps += 1
            times.append(t)
            states.append(y.copy())
            slopes.append(f.copy())
        return t, y, f

    @staticmethod
    def _adaptive(rhs, t, y, f, t1, cfg, stats, requested, times, states, slopes):
        stops = [r for r in requested if r > t] + [t1]
        span = t1 - t
        if cfg.first_step is not None:
            h = min(cfg.first_step, span)
        else:
            h = OdeintService._initial_step(rhs, t, y, f, cfg, span)
            stats.evaluations += 1
        previous_error = 1e-4
        rejected_last = False
        stop_index = 0

        while t < t1:
            if stats.steps + stats.rejected_steps >= cfg.max_steps:
                raise MaxStepsExceeded(
                    f"{cfg.max_steps} steps exhausted at t={t} before reaching {t1}", t
                )
            while stops[stop_index] <= t:
                stop_index += 1
            target = stops[stop_index]
            landing = h >= target - t
            step = target - t if landing else h
            if step <= 16 * np.finfo(float).eps * max(1.0, abs(t)):
                raise StepSizeUnderflow(f"step size underflow at t={t}", t)

            y_new, f_new, error = OdeintService._step(rhs, t, y, f, step)
            stats.evaluations += 6
            if not np.all(np.isfinite(y_new)):
                stats.rejected_steps += 1
                rejected_last = True
                h = step * MIN_FACTOR
                if h <= 16 * np.finfo(float).eps * max(1.0, abs(t)):
                    raise NonFiniteState(f"state became non-finite near t={t}", t)
                continue

            scale = cfg.abs_tol + cfg.rel_tol * np.maximum(np.abs(y), np.abs(y_new))
            norm = float(np.sqrt(np.mean((error / scale) ** 2)))

            if norm <= 1.0:
                t = target if landing else t + step
                y, f = y_new, f_new
                stats.steps += 1
                times.append(t)
                states.append(y.copy())
                slopes.append(f.copy())
                if norm == 0.0:
                    factor = MAX_FACTOR
                else:
                    factor = SAFETY * norm ** (-ALPHA) * previous_error**BETA
                    factor = min(MAX_FACTOR, max(MIN_FACTOR, factor))
                if rejected_last:
                    factor = min(factor, 1.0)
                previous_error = max(norm, 1e-4)
                rejected_last = False
                # keep the controller's step when a landing shortened it
                h = max(h, step) * factor if landing else step * factor
            else:
                stats.rejected_steps += 1
                rejected_last = True
                h = step * max(MIN_FACTOR, SAFETY * norm ** (-ALPHA))
