"""Exception hierarchy shared across the package."""


class NishLabError(Exception):
    """Base class for all package errors."""


class DomainError(NishLabError, ValueError):
    """Numeric input outside the function's domain (NaN/inf)."""


class ShapeError(NishLabError, ValueError):
    """Tensor shapes do not conform to the operation's contract."""


class ConfigError(NishLabError, ValueError):
    """Invalid or inconsistent configuration values."""


class DataError(NishLabError, ValueError):
    """Invalid data content (e.g. out-of-range labels)."""


class FormatError(NishLabError, ValueError):
    """Malformed external file (IDX, TOML, CSV)."""


class UsageError(NishLabError, ValueError):
    """API called in a way its contract forbids."""


class TrainingError(NishLabError, RuntimeError):
    """A training run failed (non-finite gradients, etc.)."""


class ExperimentError(NishLabError, RuntimeError):
    """An experiment could not produce any usable result."""
