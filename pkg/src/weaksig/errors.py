"""Exception hierarchy shared across the package."""


class WeakSigError(Exception):
    """Base class for all package errors."""


class SingularDesignError(WeakSigError):
    """Raised when a Gram or bracket matrix is numerically singular."""

    def __init__(self, message: str, smallest_singular_value: float | None = None):
        super().__init__(message)
        self.smallest_singular_value = smallest_singular_value


class ConfigError(WeakSigError, ValueError):
    """Raised when a configuration violates a required condition."""


class NoRootError(WeakSigError):
    """Raised when a bracketing root search cannot bracket a sign change."""

    def __init__(self, message: str, endpoints=None, values=None):
        super().__init__(message)
        self.endpoints = endpoints
        self.values = values


class ConvergenceError(WeakSigError):
    """Raised when an iterative solver exhausts its iteration budget."""

    def __init__(self, message: str, last_iterate=None):
        super().__init__(message)
        self.last_iterate = last_iterate


class DataFormatError(WeakSigError, ValueError):
    """Raised for malformed input files."""


class ConvergenceWarning(UserWarning):
    """Issued when an estimator returns a non-converged iterate."""
