"""Exception types shared across the solver."""


class GsrError(Exception):
    """Base class for solver errors."""


class InvalidParameterError(GsrError):
    """A particle parameter is non-finite or otherwise out of contract."""


class EmptyBatchError(GsrError):
    """A Monte-Carlo loss was asked to average over zero samples."""


class DivergedError(GsrError):
    """Optimization produced a non-finite loss or gradient.

    Carries the offending field state so callers can dump a snapshot.
    """

    def __init__(self, message, field=None, iteration=None):
        super().__init__(message)
        self.field = field
        self.iteration = iteration


class ConfigError(GsrError):
    """A run configuration file is malformed or has unknown keys."""
