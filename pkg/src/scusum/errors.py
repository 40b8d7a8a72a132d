"""Exception types raised across the package."""


class ScusumError(Exception):
    """Base class for all package errors."""


class InvalidArgumentError(ScusumError, ValueError):
    pass


class DegenerateSampleError(ScusumError, ValueError):
    """Raised when a weight sample has no spread to estimate a density from."""


class StateError(ScusumError, RuntimeError):
    """Raised when an operation is called on a model missing a required stage."""


class UnsupportedSizeError(ScusumError, ValueError):
    pass


class InvariantViolation(ScusumError, AssertionError):
    """Internal consistency check failed; indicates a bug, not bad input."""
