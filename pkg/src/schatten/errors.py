"""Exception types raised across the package."""


class InputError(ValueError):
    """Malformed or non-finite input data."""


class CapacityError(RuntimeError):
    """An enumeration would exceed its size guard."""


class DegreeBoundError(ArithmeticError):
    """Exact interpolation disagrees with held-out points."""


class ConfigurationError(ValueError):
    """A required debiasing plan or parameter is missing."""


class NumericalError(RuntimeError):
    """An iterative routine failed to converge.

    ``last`` carries the final iterate so callers can inspect or reuse it.
    """

    def __init__(self, message, last=None):
        super().__init__(message)
        self.last = last
