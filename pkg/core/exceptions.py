"""
Exception hierarchy shared by services, the router and the CLI.
"""


class LiegenError(Exception):
    """Base class for all liegen errors."""


class DimensionMismatch(LiegenError, ValueError):
    """Operand or state dimensions disagree."""


class JetOrderExceeded(LiegenError, ValueError):
    """A derivative order beyond the capacity of a field was requested."""


class OrderExceeded(LiegenError, ValueError):
    """An expansion order beyond the supported range was requested."""


class NotPeriodic(LiegenError, ValueError):
    """A periodic field was required but no period is declared."""


class NonZeroMean(LiegenError, ValueError):
    """A zero-mean periodic field was required but its average does not vanish."""


class FramePeriodicityViolation(LiegenError, ValueError):
    """exp(TA) differs from the identity."""


class ConfigInvalid(LiegenError, ValueError):
    """A system configuration is outside the supported range."""


class ConfigError(LiegenError, ValueError):
    """An experiment configuration could not be parsed or validated."""


class IntegratorFailure(LiegenError, RuntimeError):
    """The reference integrator could not complete the requested interval."""

    def __init__(self, message: str, t: float = float("nan")):
        super().__init__(message)
        self.t = t


class StepSizeUnderflow(IntegratorFailure):
    """Step size fell below the resolution of the time variable."""


class MaxStepsExceeded(IntegratorFailure):
    """Step budget exhausted before reaching the final time."""


class NonFiniteState(IntegratorFailure):
    """The state became NaN or infinite."""


class NumericalFailure(LiegenError, RuntimeError):
    """An experiment aborted on a numerical error."""
