"""
Pydantic schemas for the application.
"""

from .experiments import (
    EXPERIMENTS,
    SYSTEMS,
    ExperimentCatalog,
    ExperimentConfig,
    ExperimentName,
    ExperimentSummary,
)
from .fields import AntiderivativeMode, JetValue, QuadratureRule, SeriesTerms
from .floquet import AveragedSystem, FloquetLinearResult
from .integrator import IntegrationStats, IntegratorConfig, Trajectory
from .magnus import BernoulliTable, FlowResult, GeneratorSeries, MagnusTerms
from .systems import RotatingFrameSystem, SpectralNLSConfig
