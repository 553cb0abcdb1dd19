"""
API services initialization.
"""

from .experiment_service import ExperimentService
from .field_service import FieldService
from .floquet_service import FloquetService
from .magnus_linear_service import MagnusLinearService
from .magnus_nonlinear_service import MagnusNonlinearService
from .odeint_service import OdeintService
from .system_service import SystemService

__all__ = [
    "FieldService",
    "MagnusLinearService",
    "MagnusNonlinearService",
    "FloquetService",
    "SystemService",
    "OdeintService",
    "ExperimentService",
]
