"""
API router for experiment runs.
"""

import logging

from fastapi import APIRouter, HTTPException, status

from api.services.experiment_service import ExperimentService
from core.exceptions import ConfigError, NumericalFailure
from schemas.experiments import (
    DEFAULT_EPS,
    EXPERIMENTS,
    SYSTEMS,
    ExperimentCatalog,
    ExperimentConfig,
    ExperimentSummary,
)

logger = logging.getLogger(__name__)

router = APIRouter(prefix="/experiments", tags=["Experiments"])


@router.get(
    "/",
    response_model=ExperimentCatalog,
    summary="List experiments",
    description="Experiments, systems and default eps sweeps known to the runner",
)
async def list_experiments():
    """List experiments and systems."""
    return ExperimentCatalog(
        experiments=EXPERIMENTS, systems=SYSTEMS, default_eps=DEFAULT_EPS
    )


@router.post(
    "/",
    response_model=ExperimentSummary,
    summary="Run experiment",
    description="Run one experiment, write its result files and return the summary",
)
def run_experiment(config: ExperimentConfig):
    """Run an experiment synchronously."""
    try:
        return ExperimentService.run_experiment(config)
    except (ConfigError, ValueError) as e:
        raise HTTPException(status_code=status.HTTP_400_BAD_REQUEST, detail=str(e))
    except NumericalFailure as e:
        logger.error("Experiment %s failed: %s", config.experiment, e)
        raise HTTPException(
            status_code=status.HTTP_500_INTERNAL_SERVER_ERROR, detail=str(e)
        )
