"""Exception hierarchy shared by all modules."""


class NdsError(Exception):
    """Base class for library errors."""


class ParameterError(NdsError, ValueError):
    """An operation was called with arguments violating its preconditions."""


class ScheduleExhausted(NdsError, IndexError):
    """A table schedule was asked for a map beyond its horizon."""


class DepthExhausted(NdsError):
    """A symbolic word ran out of coordinates."""


class UnsupportedOperation(NdsError):
    """The map descriptor does not support the requested operation."""


class NumericError(NdsError):
    """A numerical root-finder failed to converge."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class BranchDomainError(NdsError):
    """No preimage within the injectivity radius exists at some step of a pull-back."""

    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


class ConstructionError(NdsError):
    """A constructive search (exactness, specification) found no admissible chain."""

    def __init__(self, message, gap=None):
        super().__init__(message)
        self.gap = gap
