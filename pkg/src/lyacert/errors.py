"""Exception types shared across the package."""


class LyacertError(Exception):
    """Base class for all package-specific errors."""


class InvalidInputError(LyacertError, ValueError):
    """Malformed or out-of-contract arguments (maps to CLI exit code 2)."""


class EvaluationError(LyacertError, RuntimeError):
    """A user-supplied callable produced unusable output (CLI exit code 3)."""


class HypothesisViolationError(LyacertError, RuntimeError):
    """Data contradicts a structural hypothesis (negative observable, h(r) < 0, ...)."""


class NoCertificateError(LyacertError, RuntimeError):
    """No admissible certificate exists for the requested construction."""
