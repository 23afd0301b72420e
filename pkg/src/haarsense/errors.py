"""Exception hierarchy shared across the package."""


class HaarSenseError(Exception):
    """Base class for all package errors."""


class DomainError(HaarSenseError, ValueError):
    """Argument outside the half-open unit interval or other valid domain."""


class OrderError(HaarSenseError, ValueError):
    """Requested order exceeds what the coefficients hold."""


class ResolutionError(HaarSenseError, ValueError):
    """Sampling grid too coarse for the requested order or sequence."""


class BoundsError(HaarSenseError, ValueError):
    """Pulse sequence extends outside the signal support."""


class SignalFormatError(HaarSenseError, ValueError):
    """Malformed signal file or signal description."""


class PhaseWrapError(HaarSenseError):
    """Normalized contrast beyond +/-1; the phase cannot be inverted unambiguously.

    ``location`` carries the measurement key (e.g. ``(order, shift)``) when
    the error is raised from inside a protocol run.
    """

    def __init__(self, message, location=None):
        super().__init__(message)
        self.location = location


class DegenerateReferenceError(HaarSenseError):
    """Bright and dark reference counts are not resolved from each other."""


class CalibrationError(HaarSenseError):
    """Calibration fit did not converge."""

    def __init__(self, message, residuals=None):
        super().__init__(message)
        self.residuals = residuals


class PackingError(HaarSenseError):
    """Sequences cannot be packed into signal runs as requested."""


class ConfigError(HaarSenseError, ValueError):
    """Invalid run configuration."""
