"""Exception hierarchy shared by all powerscope modules.

The CLI maps these onto process exit codes: bad arguments and
configuration problems exit 1, file/format problems exit 2, and
numeric/analysis failures exit 3.
"""


class PowerscopeError(Exception):
    """Base class for all powerscope errors."""


class ParameterError(PowerscopeError, ValueError):
    """An argument violates a precondition (bad value, bad length, bad config)."""


class ShapeError(ParameterError):
    """Array inputs have incompatible or unsupported shapes."""


class ConfigError(ParameterError):
    """An experiment configuration is internally inconsistent."""


class StateError(PowerscopeError):
    """An operation was called on an object in the wrong state (e.g. unfitted)."""


class TrainingError(PowerscopeError):
    """Training cannot proceed (e.g. a class is missing from the data)."""


class FormatError(PowerscopeError):
    """A file on disk is malformed; the message names the offending location."""


class AnalysisError(PowerscopeError):
    """A numeric analysis is undefined on the given data (degenerate input,
    singular regression, no detectable periodicity, ...)."""
