"""Exception hierarchy shared by every stage of the simulator."""


class BBMVError(Exception):
    """Base class for all errors raised by this package."""


class InvalidInputError(BBMVError, ValueError):
    """An argument violates an operation's precondition."""


class InvariantError(BBMVError):
    """A constructed object fails one of its type invariants."""


class NoSolutionError(BBMVError):
    """A tuning or inversion problem has no solution for the given input."""


class InsufficientDataError(BBMVError):
    """Too few detected trials to form an estimate."""

    def __init__(self, message, pair=None):
        super().__init__(message)
        self.pair = pair


class ConfigError(BBMVError, ValueError):
    """A run configuration is malformed or inconsistent."""


class StageError(BBMVError):
    """Wraps a component error with the pipeline stage that raised it."""

    def __init__(self, stage, cause):
        super().__init__(f"stage {stage}: {cause}")
        self.stage = stage
        self.cause = cause
