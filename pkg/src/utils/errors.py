"""Exception types for the LSTC safe-driving training system"""


class LSTCError(Exception):
    """Base class for every error raised by this package"""


class ShapeError(LSTCError, ValueError):
    """An array does not have the shape a network or buffer expects"""


class NonFiniteError(LSTCError, ArithmeticError):
    """A NaN or Inf appeared in a loss, gradient or parameter

    Attributes:
        index: offending batch index (or None when not batch-related)
        name: offending parameter or quantity name (or None)
    """

    def __init__(self, message, index=None, name=None):
        super().__init__(message)
        self.index = index
        self.name = name


class ConfigError(LSTCError, ValueError):
    """A run configuration is malformed or out of range"""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class EpisodeTerminatedError(LSTCError, RuntimeError):
    """step() was called on an episode that already ended"""


class BoundaryError(LSTCError, ValueError):
    """Episode boundary flags are inconsistent with the data they describe"""


class CheckpointFormatError(LSTCError, ValueError):
    """A checkpoint file is not a readable LSTC checkpoint"""


class CheckpointVersionError(CheckpointFormatError):
    """A checkpoint was written by an incompatible format version"""

    def __init__(self, found, expected):
        super().__init__(f"checkpoint format version {found} is not supported (expected version {expected})")
        self.found = found
        self.expected = expected


class MetricsFormatError(LSTCError, ValueError):
    """A metrics CSV does not follow the epoch report schema"""

    def __init__(self, message, row=None):
        if row is not None:
            message = f"row {row}: {message}"
        super().__init__(message)
        self.row = row


class EpochAbortedError(LSTCError, RuntimeError):
    """A training epoch was abandoned and the agent state restored

    state holds the epoch-start AgentState so the caller can checkpoint it.
    """

    def __init__(self, message, state=None):
        super().__init__(message)
        self.state = state
