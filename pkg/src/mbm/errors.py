"""Exception hierarchy shared by every module of the package."""


class MbmError(Exception):
    """Base class for all package errors."""


class ParameterDomainError(MbmError, ValueError):
    """A constructor parameter lies outside its admissible domain.

    ``key`` names the offending parameter so front ends can report it.
    """

    def __init__(self, key, message):
        super().__init__(f"{key}: {message}")
        self.key = key


class DomainError(MbmError, ValueError):
    """An evaluation argument (time, index, resolution) is out of range."""


class HurstSpecError(ParameterDomainError):
    """A Hurst-spec string could not be parsed."""


class ConfigError(MbmError, ValueError):
    """An experiment configuration is invalid for the requested study."""


class NotPositiveSemidefinite(MbmError, ArithmeticError):
    """Cholesky factorization failed even after jitter escalation."""


class DegeneratePath(MbmError, ArithmeticError):
    """A path has zero quadratic variation where a ratio needs it positive."""


class OutOfRange(MbmError, ArithmeticError):
    """A value lies outside the attainable range of a monotone map."""

    def __init__(self, value, lo, hi):
        super().__init__(f"value {value!r} outside attainable interval ({lo!r}, {hi!r})")
        self.value = value
        self.lo = lo
        self.hi = hi


class EmptyWindow(MbmError, ArithmeticError):
    """No grid index falls inside a local estimation window."""


class PathFormatError(MbmError, OSError):
    """A path CSV file is missing, empty or malformed."""
