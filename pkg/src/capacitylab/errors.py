"""Exception types raised across capacitylab."""


class CapacityLabError(Exception):
    """Base class for all library errors."""


class InvalidPath(CapacityLabError, ValueError):
    pass


class SpaceTooLarge(CapacityLabError, ValueError):
    pass


class SupportViolation(CapacityLabError, ValueError):
    """A function handed to a relative norm has support outside its cell."""


class DegenerateCell(CapacityLabError, ZeroDivisionError):
    pass


class SingularKernel(CapacityLabError, ValueError):
    pass


class Infeasible(CapacityLabError):
    """Some point of E cannot be reached by any nonnegative density."""


class NoConvergence(CapacityLabError):
    """Solver ran out of iterations; ``best`` holds the last iterate's result."""

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class UseGreedy(CapacityLabError):
    """Instance is beyond the exact join budget."""


class InvalidInstance(CapacityLabError, ValueError):
    pass


class TooLarge(CapacityLabError):
    pass


class ConfigError(CapacityLabError):
    """Raised with every problem found while parsing a config, not just the first."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("\n".join(str(e) for e in self.errors))
