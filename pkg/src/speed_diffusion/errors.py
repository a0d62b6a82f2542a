"""Exception types shared across the package.

The CLI maps these onto process exit codes: configuration problems exit
with 2, numeric aborts with 3 and I/O failures with 4.
"""


class SpeedError(Exception):
    """Base class for every error raised by this package."""


class ConfigError(SpeedError, ValueError):
    """Invalid or inconsistent configuration.

    ``key`` names the offending configuration key when one is known.
    """

    def __init__(self, message, key=None):
        super().__init__(message)
        self.key = key


class InvalidParameterError(SpeedError, ValueError):
    """A numeric parameter is outside its admissible range."""


class StepIndexError(SpeedError, IndexError):
    """A time-step index falls outside ``[1, T]``."""


class NumericError(SpeedError, ArithmeticError):
    """A computation produced a non-finite or degenerate value."""


class UnderflowError(NumericError):
    """A cumulative product underflowed to exactly zero."""


class NonFiniteGradientError(NumericError):
    """An optimizer step received NaN or infinite gradients."""


class NotReachedError(NumericError):
    """A threshold is never crossed on the schedule's horizon."""
