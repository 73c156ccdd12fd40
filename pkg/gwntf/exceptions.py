"""
Exception types raised by the gwntf package.
"""


class GwntfError(Exception):
    """Base class for all gwntf errors."""


class ShapeError(GwntfError, ValueError):
    """Mode out of range, or inconsistent shapes between operands."""


class NumericalAbort(GwntfError, FloatingPointError):
    """A NaN/Inf sentinel tripped during an iterative update."""

    def __init__(self, message: str, **context):
        self.context = context
        if context:
            details = ", ".join(f"{key}={value}" for key, value in context.items())
            message = f"{message} ({details})"
        super().__init__(message)


class InfeasibleTransport(GwntfError, ValueError):
    """Source and target masses differ, so no transport plan exists."""


class OracleLimitError(GwntfError, ValueError):
    """Problem too large for the exact transport oracle."""


class TensorFormatError(GwntfError, ValueError):
    """Malformed tensor file or dataset."""


class ConfigError(GwntfError, ValueError):
    """Invalid configuration value."""


class ExperimentFailed(GwntfError):
    """Too many Monte-Carlo runs of an experiment failed."""
