"""Exception taxonomy shared across the package.

The CLI maps these onto process exit codes:

    UsageError (and subclasses)      -> 1
    DataError, FormatError           -> 2
    NumericalError, TrainingError    -> 3
"""


class StatecoderError(Exception):
    """Base class for every error raised by this package."""


class UsageError(StatecoderError):
    """The caller violated a precondition (bad argument, bad config)."""


class ConfigurationError(UsageError):
    """A generator or run configuration is internally inconsistent."""


class DataError(StatecoderError):
    """Input data is malformed or contains non-finite values."""


class FormatError(StatecoderError):
    """A persisted artifact is corrupted or has an unsupported version."""


class NumericalError(StatecoderError):
    """A computation produced non-finite values."""


class TrainingError(StatecoderError):
    """Optimization diverged or failed to converge within its budget."""
