"""
Service layer for the experiment runner: sweeps, checks and result files.
"""

import csv
import itertools
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Any, Callable, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from api.services.field_service import FieldService
from api.services.floquet_service import FloquetService
from api.services.magnus_linear_service import MagnusLinearService
from api.services.magnus_nonlinear_service import MagnusNonlinearService
from api.services.odeint_service import OdeintService
from api.services.system_service import SystemService
from core.config import settings
from core.exceptions import (
    ConfigError,
    ConfigInvalid,
    LiegenError,
    NumericalFailure,
    OrderExceeded,
)
from core.words import MAX_WORD_ORDER
from schemas.experiments import ExperimentConfig, ExperimentSummary
from schemas.fields import QuadratureRule
from schemas.integrator import IntegratorConfig
from schemas.systems import SpectralNLSConfig

logger = logging.getLogger(__name__)

VDP_START = (1.0, 0.5)
# first-order stroboscopic errors scale as eps^2 only where the x1 x2^3 cycle deformation vanishes
VDP_CYCLE_START = (2.0, 0.0)
ORACLE_ORDERS = (2, 3, 4)

ALLOWED_SYSTEMS: Dict[str, Tuple[str, ...]] = {
    "magnus-linear-order": ("linear-ab", "random"),
    "magnus-nonlinear": ("vdp",),
    "vdp-averaging": ("vdp",),
    "vdp-limit-cycle": ("vdp",),
    "nls-averaging": ("nls1d",),
    "oracle-crosscheck": ("random",),
}


class ResultWriter:
    """Writes the CSV, plot and summary files of one run."""

    def __init__(self, out_dir: str):
        self.out_dir = Path(out_dir)
        self.out_dir.mkdir(parents=True, exist_ok=True)
        self.trajectories: List[str] = []
        self.has_errors = False

    @staticmethod
    def _number(value) -> str:
        return format(float(value), ".17g")

    def _write_rows(self, name: str, header: Sequence[str], rows: Iterable[Sequence]) -> None:
        with open(self.out_dir / name, "w", newline="", encoding="utf-8") as handle:
            writer = csv.writer(handle, lineterminator="\n")
            writer.writerow(header)
            for row in rows:
                writer.writerow([self._number(v) for v in row])

    def trajectory(self, name: str, times, states) -> None:
        states = np.asarray(states, dtype=float)
        header = ["t"] + [f"x{i + 1}" for i in range(states.shape[1])]
        rows = (itertools.chain([t], state) for t, state in zip(times, states))
        self._write_rows(name, header, rows)
        self.trajectories.append(name)

    def errors(self, rows: Iterable[Tuple[float, int, float]]) -> None:
        self._write_rows("errors.csv", ["eps", "order", "error"], rows)
        self.has_errors = True

    def plot(self, title: str) -> None:
        lines = [
            f"# {title}",
            "set datafile separator ','",
            "set key autotitle columnhead",
            "set terminal pngcairo size 900,600",
            "set output 'trajectory.png'",
            "set xlabel 'x1'",
            "set ylabel 'x2'",
            "plot " + ", ".join(f"'{name}' using 2:3 with lines" for name in self.trajectories),
        ]
        if self.has_errors:
            lines += [
                "set output 'errors.png'",
                "set logscale xy",
                "set xlabel 'eps'",
                "set ylabel 'error'",
                "plot 'errors.csv' using 1:3 with linespoints",
            ]
        (self.out_dir / "plot.gp").write_text("\n".join(lines) + "\n", encoding="utf-8")

    def summary(self, summary: ExperimentSummary) -> None:
        text = json.dumps(summary.model_dump(), sort_keys=True, indent=2)
        (self.out_dir / "summary.json").write_text(text + "\n", encoding="utf-8")


class Outcome:
    """Checks and diagnostics collected by one experiment."""

    def __init__(self):
        self.checks: Dict[str, bool] = {}
        self.diagnostics: Dict[str, Any] = {}
        self.tolerances: Dict[str, float] = {}

    def check(self, name: str, value: float, bound: float) -> None:
        """Record value <= bound."""
        self.diagnostics[name] = float(value)
        self.tolerances[name] = float(bound)
        self.checks[name] = bool(np.isfinite(value) and value <= bound)


def sweep(fn: Callable, items: Sequence) -> List:
    """fn over items on a thread pool, results in input order."""
    items = list(items)
    if len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=min(settings.worker_count(), len(items))) as pool:
        return list(pool.map(fn, items))


def loglog_slope(eps: Sequence[float], errors: Sequence[float]) -> float:
    return float(np.polyfit(np.log(eps), np.log(errors), 1)[0])


def _as_floats(values) -> List[float]:
    return [float(v) for v in values]


class ExperimentService:
    """Service class for experiment runs."""

    @staticmethod
    def run_experiment(cfg: ExperimentConfig) -> ExperimentSummary:
        """Run one experiment, write its files and return the summary."""
        system = cfg.system or ALLOWED_SYSTEMS[cfg.experiment][0]
        if system not in ALLOWED_SYSTEMS[cfg.experiment]:
            raise ConfigError(
                f"{cfg.experiment} runs on {ALLOWED_SYSTEMS[cfg.experiment]}, not {system!r}"
            )
        handler = HANDLERS[cfg.experiment]
        logger.info("Running %s on %s into %s", cfg.experiment, system, cfg.out_dir)
        try:
            writer = ResultWriter(cfg.out_dir)
        except OSError as exc:
            raise ConfigError(f"cannot create {cfg.out_dir}: {exc}") from exc

        outcome = Outcome()
        try:
            handler(cfg, system, writer, outcome)
        except (ConfigError, NumericalFailure):
            raise
        except (ConfigInvalid, OrderExceeded) as exc:
            raise ConfigError(str(exc)) from exc
        except LiegenError as exc:
            raise NumericalFailure(f"{cfg.experiment} failed: {exc}") from exc
        except (FloatingPointError, np.linalg.LinAlgError) as exc:
            raise NumericalFailure(f"{cfg.experiment} failed: {exc}") from exc
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

        summary = ExperimentSummary(
            experiment=cfg.experiment,
            system=system,
            passed=all(outcome.checks.values()),
            checks=outcome.checks,
            diagnostics=outcome.diagnostics,
            tolerances=outcome.tolerances,
            config=cfg.model_dump(),
        )
        writer.plot(f"{cfg.experiment} on {system}")
        writer.summary(summary)
        logger.info(
            "%s %s: %s",
            cfg.experiment,
            "passed" if summary.passed else "FAILED",
            ", ".join(f"{k}={v}" for k, v in sorted(outcome.checks.items())),
        )
        return summary

    @staticmethod
    def _check_order(order: int, limit: int) -> None:
        if order > limit:
            raise ConfigError(f"order {order} exceeds {limit} for this experiment")

    @staticmethod
    def _vdp_rotating_field():
        return SystemService.autonomous_to_periodic(SystemService.vdp_field())

    @staticmethod
    def magnus_linear_order(cfg: ExperimentConfig, system: str, writer, outcome) -> None:
        ExperimentService._check_order(cfg.order, settings.MAX_MAGNUS_ORDER)
        if system == "random":
            a = SystemService.random_polynomial_matrix(np.random.default_rng(cfg.seed), 2)
        else:
            a = SystemService.linear_ab_matrix()
        t = cfg.t_end or 1.0
        quad = QuadratureRule(nodes_per_panel=cfg.quad_nodes)
        eps_values = cfg.eps_values()

        def error_at(eps: float) -> float:
            approx = MagnusLinearService.propagate_linear(a, cfg.order, t, eps, quad)
            exact = MagnusLinearService.reference_propagator(a, t, eps)
            return float(np.linalg.norm(approx - exact))

        errors = sweep(error_at, eps_values)
        writer.errors((eps, cfg.order, err) for eps, err in zip(eps_values, errors))
        times = np.linspace(0.0, t, 11)
        states = [
            MagnusLinearService.propagate_linear(a, cfg.order, s, eps_values[0], quad)[:, 0].real
            for s in times
        ]
        writer.trajectory("trajectory.csv", times, states)

        outcome.diagnostics["errors"] = _as_floats(errors)
        outcome.diagnostics["dexp_residual"] = MagnusLinearService.dexp_residual(
            a, cfg.order, t, eps_values[-1], quad
        )
        if len(eps_values) > 1:
            slope = loglog_slope(eps_values, errors)
            outcome.diagnostics["expected_slope"] = cfg.order + 1
            outcome.check("slope_deviation", abs(slope - (cfg.order + 1)), 0.3)
            outcome.diagnostics["slope"] = slope

    @staticmethod
    def magnus_nonlinear(cfg: ExperimentConfig, system: str, writer, outcome) -> None:
        ExperimentService._check_order(cfg.order, MAX_WORD_ORDER)
        g = ExperimentService._vdp_rotating_field()
        quad = QuadratureRule(nodes_per_panel=cfg.quad_nodes)
        generator = MagnusNonlinearService.generator_terms(g, cfg.order, quad)
        t_star = cfg.t_end or 1.0
        x0 = np.array(VDP_START)
        eps_values = cfg.eps_values()
        reference_cfg = IntegratorConfig.with_tolerance(settings.REFERENCE_TOL)

        def error_at(eps: float) -> float:
            approx = MagnusNonlinearService.reconstruct_state(
                generator, x0, t_star, tol=cfg.tol, eps=eps
            ).state
            exact = OdeintService.integrate(
                OdeintService.field_rhs(g, eps), x0, 0.0, t_star, reference_cfg
            ).final_state
            return float(np.linalg.norm(approx - exact))

        errors = sweep(error_at, eps_values)
        writer.errors((eps, cfg.order, err) for eps, err in zip(eps_values, errors))

        eps0 = eps_values[0]
        times = np.linspace(0.0, t_star, 11)
        reconstructed = sweep(
            lambda s: MagnusNonlinearService.reconstruct_state(
                generator, x0, s, tol=cfg.tol, eps=eps0
            ).state,
            times,
        )
        reference = OdeintService.integrate(
            OdeintService.field_rhs(g, eps0),
            x0,
            0.0,
            t_star,
            IntegratorConfig.with_tolerance(settings.REFERENCE_TOL, dense_output=list(times)),
        )
        writer.trajectory("trajectory.csv", times, reconstructed)
        writer.trajectory("reference.csv", reference.times, reference.states)

        outcome.diagnostics["errors"] = _as_floats(errors)
        outcome.check(
            "initial_reconstruction", float(np.linalg.norm(reconstructed[0] - x0)), 1e-10
        )
        if len(eps_values) > 1:
            slope = loglog_slope(eps_values, errors)
            outcome.diagnostics["slope"] = slope
            outcome.diagnostics["expected_slope"] = cfg.order + 1
            outcome.check("slope_deviation", abs(slope - (cfg.order + 1)), 0.5)

    @staticmethod
    def vdp_averaging(cfg: ExperimentConfig, system: str, writer, outcome) -> None:
        ExperimentService._check_order(cfg.order, 3)
        g = ExperimentService._vdp_rotating_field()
        frame = SystemService.frame_action(SystemService.vdp_field())
        quad = QuadratureRule(nodes_per_panel=max(cfg.quad_nodes, settings.TRIG_QUAD_NODES))
        averaged = FloquetService.averaged_terms(g, cfg.order, quad, quad)
        period = averaged.period
        t_end = cfg.t_end or 20.0 * period
        x0 = np.array(VDP_CYCLE_START if cfg.order == 1 else VDP_START)
        eps_values = cfg.eps_values()

        strobe = FloquetService.stroboscopic_times(period, t_end)
        multiples = [t for t in strobe if abs(t / period - round(t / period)) < 1e-9]
        plot_times = list(np.linspace(0.0, t_end, int(np.ceil(20 * t_end / period)) + 1))
        output = sorted(set(strobe) | set(plot_times))

        def run(eps: float):
            reference = OdeintService.integrate(
                OdeintService.field_rhs(g, eps),
                x0,
                0.0,
                t_end,
                IntegratorConfig.with_tolerance(settings.REFERENCE_TOL, dense_output=output),
            )
            approx = FloquetService.stroboscopic_solve(
                averaged, x0, t_end, eps, tol=cfg.tol, times=output
            )
            error = max(
                float(np.linalg.norm(reference.state_at(t) - approx.state_at(t)))
                for t in multiples
            )
            return error, reference, approx

        results = sweep(run, eps_values)
        errors = [error for error, _, _ in results]
        writer.errors((eps, cfg.order, err) for eps, err in zip(eps_values, errors))

        _, reference, approx = results[0]
        times = np.asarray(plot_times)
        full = np.array([reference.state_at(t) for t in plot_times])
        mean = np.array([approx.state_at(t) for t in plot_times])
        writer.trajectory("trajectory.csv", times, np.asarray(frame(times, full)))
        writer.trajectory("averaged.csv", times, np.asarray(frame(times, mean)))

        identity = FloquetService.change_of_variables(
            averaged, x0, period, eps_values[0], tol=cfg.tol
        )
        outcome.diagnostics["stroboscopic_errors"] = _as_floats(errors)
        outcome.diagnostics["periods"] = len(multiples) - 1
        outcome.diagnostics["start"] = _as_floats(x0)
        outcome.check("stroboscopic_identity", float(np.linalg.norm(identity - x0)), 1e-8)
        if len(eps_values) > 1:
            slope = loglog_slope(eps_values, errors)
            outcome.diagnostics["slope"] = slope
            outcome.diagnostics["expected_slope"] = cfg.order + 1
            outcome.check("slope_deviation", abs(slope - (cfg.order + 1)), 0.4)

    @staticmethod
    def vdp_limit_cycle(cfg: ExperimentConfig, system: str, writer, outcome) -> None:
        g = ExperimentService._vdp_rotating_field()
        quad = QuadratureRule(nodes_per_panel=max(cfg.quad_nodes, settings.TRIG_QUAD_NODES))
        refined = FloquetService.averaged_terms(g, 2, quad, quad)
        first = FloquetService.averaged_terms(g, 1, quad, quad)
        t_end = cfg.t_end or 300.0
        angles = 2.0 * np.pi * np.arange(8) / 8
        starts = 1.5 * np.stack([np.cos(angles), np.sin(angles)], axis=-1)
        tail = list(np.linspace(max(0.0, t_end - 20.0), t_end, 11))
        law_times = list(np.linspace(0.0, t_end, 31))
        eps_values = cfg.eps_values()

        def run(job):
            eps, start = job
            cycle = FloquetService.stroboscopic_solve(
                refined, start, t_end, eps, tol=cfg.tol, times=tail
            )
            invariant = np.max(
                np.abs(SystemService.vdp_limit_cycle_invariant(cycle.states, eps))
            )
            radial = FloquetService.stroboscopic_solve(
                first, start, t_end, eps, tol=cfg.tol, times=law_times
            )
            n0 = float(np.sum(start**2))
            law = SystemService.vdp_radius_law(n0, eps, radial.times)
            law_error = np.max(np.abs(np.sum(radial.states**2, axis=-1) - law))
            radius_error = abs(float(np.linalg.norm(radial.final_state)) - 2.0)
            return float(invariant), radius_error, float(law_error), radial

        jobs = [(eps, start) for eps in eps_values for start in starts]
        results = sweep(run, jobs)
        invariants = [r[0] for r in results]
        radius_errors = [r[1] for r in results]

        rows = []
        for index, eps in enumerate(eps_values):
            chunk = results[index * len(starts) : (index + 1) * len(starts)]
            rows.append((eps, 2, max(r[0] for r in chunk)))
            rows.append((eps, 1, max(r[1] for r in chunk)))
        writer.errors(rows)

        dense = list(np.linspace(0.0, t_end, 601))
        trajectory = FloquetService.stroboscopic_solve(
            refined, starts[0], t_end, eps_values[0], tol=cfg.tol, times=dense
        )
        writer.trajectory("trajectory.csv", trajectory.times, trajectory.states)
        writer.trajectory("first_order.csv", results[0][3].times, results[0][3].states)

        outcome.check("cycle_invariant", max(invariants), 0.05)
        outcome.check("first_order_radius", max(radius_errors), 1e-6)
        outcome.check("radius_law", max(r[2] for r in results), 1e-8)

    @staticmethod
    def nls_averaging(cfg: ExperimentConfig, system: str, writer, outcome) -> None:
        nls = SpectralNLSConfig()
        frame_system = SystemService.nls_spectral_field(nls)
        g = SystemService.autonomous_to_periodic(frame_system)
        period = nls.period
        rng = np.random.default_rng(cfg.seed)
        eps = cfg.eps_values()[0]
        midpoint = QuadratureRule(
            kind="periodic-midpoint", nodes_per_panel=4 * nls.modes**2 + 1
        )
        averaged = FloquetService.averaged_terms(
            g, 1, QuadratureRule.trigonometric(), midpoint
        )
        outcome.diagnostics["order_used"] = 1

        probes = 0.1 * rng.standard_normal((3, nls.dim))
        shifts = np.array([0.3, 1.1, 2.9])
        periodicity = np.max(
            np.abs(np.asarray(g(probes, shifts + period)) - np.asarray(g(probes, shifts)))
        )
        outcome.check("periodicity", float(periodicity), 1e-10)

        x0 = 0.1 * rng.standard_normal(nls.dim)
        times = list(np.linspace(0.0, period, 21))
        reference = OdeintService.integrate(
            OdeintService.field_rhs(g, eps),
            x0,
            0.0,
            period,
            IntegratorConfig.with_tolerance(settings.REFERENCE_TOL, dense_output=times),
        )
        masses = SystemService.nls_mass(reference.states)
        outcome.check(
            "mass_drift", float(np.max(np.abs(masses - masses[0])) / masses[0]), 1e-10
        )

        j_matrix = SystemService.nls_symplectic_matrix(nls)
        asymmetry = 0.0
        for x in 0.1 * rng.standard_normal((5, nls.dim)):
            hessian = j_matrix @ FieldService.eval_field(averaged.g_terms[0], x, 0.0, 1).jacobian
            scale = max(1.0, float(np.max(np.abs(hessian))))
            asymmetry = max(asymmetry, float(np.max(np.abs(hessian - hessian.T))) / scale)
        outcome.check("hamiltonian_symmetry", asymmetry, 1e-6)

        x = 0.1 * rng.standard_normal(nls.dim)
        t = 0.7
        step = 1e-6
        gradient = np.array(
            [
                (
                    SystemService.nls_hamiltonian(nls, x + step * e, t)
                    - SystemService.nls_hamiltonian(nls, x - step * e, t)
                )
                / (2.0 * step)
                for e in np.eye(nls.dim)
            ]
        )
        field = np.asarray(g(x, t))
        predicted = np.linalg.solve(j_matrix, gradient)
        outcome.check(
            "gradient",
            float(np.linalg.norm(predicted - field) / np.linalg.norm(field)),
            1e-5,
        )

        approx = FloquetService.stroboscopic_solve(
            averaged, x0, period, eps, tol=cfg.tol, times=times
        )
        error = float(np.linalg.norm(reference.final_state - approx.final_state))
        writer.errors([(eps, 1, error)])
        writer.trajectory("trajectory.csv", reference.times, reference.states)
        writer.trajectory("averaged.csv", approx.times, approx.states)
        outcome.diagnostics["stroboscopic_error"] = error

    @staticmethod
    def oracle_crosscheck(cfg: ExperimentConfig, system: str, writer, outcome) -> None:
        rng = np.random.default_rng(cfg.seed)
        matrices = [SystemService.random_polynomial_matrix(rng, 2) for _ in range(5)]
        matrices += [SystemService.random_polynomial_matrix(rng, 3) for _ in range(5)]
        quad = QuadratureRule(nodes_per_panel=cfg.quad_nodes)
        top = max(ORACLE_ORDERS)
        t = cfg.t_end or 1.0

        def discrepancies(a) -> List[float]:
            recursive = MagnusLinearService.magnus_terms_recursive(a, top, quad).omega_at(t)
            prelie = MagnusLinearService.magnus_terms_prelie(a, top, quad).omega_at(t)
            values = []
            for n in ORACLE_ORDERS:
                routes = [
                    recursive[n - 1],
                    prelie[n - 1],
                    MagnusLinearService.omega_permutation_oracle(a, n, t),
                    MagnusLinearService.omega_descent_oracle(a, n, t),
                ]
                values.append(
                    max(
                        float(np.linalg.norm(p - q))
                        for p, q in itertools.combinations(routes, 2)
                    )
                )
            return values

        table = np.array(sweep(discrepancies, matrices))
        per_order = table.max(axis=0)
        writer.errors((1.0, n, err) for n, err in zip(ORACLE_ORDERS, per_order))
        outcome.check("route_discrepancy", float(per_order.max()), 1e-9)
        outcome.diagnostics["route_discrepancy_by_order"] = {
            str(n): float(err) for n, err in zip(ORACLE_ORDERS, per_order)
        }

        residuals = []
        for _ in range(20):
            f, g, h = (
                FieldService.linear_field(SystemService.random_polynomial_matrix(rng, 2))
                for _ in range(3)
            )
            x = rng.standard_normal(2)
            residuals.append(FieldService.prelie_identity_residual(f, g, h, x, t, quad=quad))
        outcome.check("prelie_residual", max(residuals), 1e-9)

        eps = cfg.eps_values()[0]
        times = np.linspace(0.0, t, 11)
        states = [
            MagnusLinearService.propagate_linear(matrices[0], top, s, eps, quad)[:, 0]
            for s in times
        ]
        writer.trajectory("trajectory.csv", times, states)


HANDLERS: Dict[str, Callable[[ExperimentConfig, str, ResultWriter, Outcome], None]] = {
    "magnus-linear-order": ExperimentService.magnus_linear_order,
    "magnus-nonlinear": ExperimentService.magnus_nonlinear,
    "vdp-averaging": ExperimentService.vdp_averaging,
    "vdp-limit-cycle": ExperimentService.vdp_limit_cycle,
    "nls-averaging": ExperimentService.nls_averaging,
    "oracle-crosscheck": ExperimentService.oracle_crosscheck,
}
