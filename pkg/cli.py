"""
Batch entry point: runs one experiment and maps the outcome to an exit status.

    python cli.py run --config cfg.json
    python cli.py vdp-averaging --eps 0.05 --order 2 --t-end 100 --out results/vdp
"""

import argparse
import json
import logging
import sys
from typing import Any, Dict, List, Optional

from pydantic import ValidationError

from api.services.experiment_service import ExperimentService
from core.config import settings
from core.exceptions import ConfigError, NumericalFailure
from schemas.experiments import EXPERIMENTS, SYSTEMS, ExperimentConfig

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_TOLERANCE = 1
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3

ALIASES = {"vdp": "vdp-averaging"}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="liegen", description="Magnus and Floquet-Magnus experiment runner"
    )
    commands = parser.add_subparsers(dest="command", required=True)

    run = commands.add_parser("run", help="run the experiment described by a JSON file")
    run.add_argument("--config", required=True, help="path to the JSON configuration")

    for name in EXPERIMENTS + list(ALIASES):
        sub = commands.add_parser(name, help=f"run {ALIASES.get(name, name)}")
        sub.add_argument("--eps", type=float, nargs="+", help="eps value or sweep")
        sub.add_argument("--order", type=int, help="truncation order")
        sub.add_argument("--t-end", dest="t_end", type=float, help="final time")
        sub.add_argument("--quad-nodes", dest="quad_nodes", type=int, help="nodes per panel")
        sub.add_argument("--tol", type=float, help="integrator tolerance")
        sub.add_argument("--seed", type=int, help="seed for random matrices and points")
        sub.add_argument("--system", choices=SYSTEMS, help="system to run on")
        sub.add_argument("--out", dest="out_dir", help="output directory")
    return parser


def load_config(path: str) -> ExperimentConfig:
    """Parse and validate a JSON configuration file."""
    try:
        with open(path, encoding="utf-8") as handle:
            payload = json.load(handle)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    if not isinstance(payload, dict):
        raise ConfigError(f"{path} must hold a single JSON object")
    return _validated(payload)


def config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    """ExperimentConfig from a shortcut subcommand; unset options keep their defaults."""
    payload: Dict[str, Any] = {"experiment": ALIASES.get(args.command, args.command)}
    for key in ("order", "t_end", "quad_nodes", "tol", "seed", "system", "out_dir"):
        value = getattr(args, key)
        if value is not None:
            payload[key] = value
    if args.eps is not None:
        payload["eps"] = args.eps[0] if len(args.eps) == 1 else args.eps
    return _validated(payload)


def _validated(payload: Dict[str, Any]) -> ExperimentConfig:
    try:
        return ExperimentConfig.model_validate(payload)
    except ValidationError as exc:
        raise ConfigError(str(exc)) from exc


def main(argv: Optional[List[str]] = None) -> int:
    logging.basicConfig(
        level=settings.LOG_LEVEL,
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
        handlers=[logging.StreamHandler()],
    )
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config) if args.command == "run" else config_from_args(args)
        summary = ExperimentService.run_experiment(cfg)
    except ConfigError as exc:
        logger.error("Configuration error: %s", exc)
        return EXIT_CONFIG
    except NumericalFailure as exc:
        logger.error("Numerical failure: %s", exc)
        return EXIT_NUMERICAL

    if not summary.passed:
        failed = sorted(name for name, ok in summary.checks.items() if not ok)
        logger.warning("Tolerances violated: %s", ", ".join(failed))
        return EXIT_TOLERANCE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
