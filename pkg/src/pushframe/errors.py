"""Exception hierarchy shared by every pushframe module."""


class PushframeError(Exception):
    """Base class for all library errors."""


class InvalidOrderError(PushframeError, ValueError):
    """A Hadamard order that is not a power of two in [1, 4096]."""


class ConstraintInfeasibleError(PushframeError):
    """The scramble search could not meet the requested run-length limit."""

    def __init__(self, message, best_run):
        super().__init__(message)
        self.best_run = best_run


class FormatError(PushframeError, ValueError):
    """Malformed file contents. ``offset`` is the byte offset of the problem."""

    def __init__(self, message, offset=None):
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class DigestMismatchError(PushframeError, ValueError):
    """Stream, pattern and calibration do not belong together."""


class ConfigError(PushframeError, ValueError):
    """Invalid simulation or experiment parameters.

    ``fields`` lists the offending parameter names.
    """

    def __init__(self, message, fields=()):
        super().__init__(message)
        self.fields = tuple(fields)
