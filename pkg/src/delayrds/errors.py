"""Exception types raised across the package."""


class DelayRDSError(Exception):
    """Base class for all package errors."""


class DimensionError(DelayRDSError, ValueError):
    """Array shapes, mode counts or history grids do not agree."""


class AlignmentError(DelayRDSError, ValueError):
    """A time or duration is not a multiple of the grid step."""


class DomainError(DelayRDSError, ValueError):
    """An argument lies outside the domain of the operation."""


class ConfigurationError(DelayRDSError, ValueError):
    """Model parameters violate a standing hypothesis."""


class InsufficientWindowError(DelayRDSError, ValueError):
    """A diagnostic window is too short to be meaningful."""


class NotConvergedError(DelayRDSError, RuntimeError):
    """A pullback cloud has not settled enough to serve as an attractor sample."""
