"""Exception hierarchy shared by the whole package.

The CLI maps these onto exit codes: :class:`ValidationError` -> 2,
:class:`InfeasibleModelError` -> 3, :class:`BudgetExceededError` -> 4.
"""


class LevyMapsError(Exception):
    """Base class for package errors."""


class ValidationError(LevyMapsError, ValueError):
    """An object violates one of its structural invariants."""


class InfeasibleModelError(LevyMapsError, ValueError):
    """A model or conditioning cannot be realised (parity, support, weights)."""


class ExponentError(LevyMapsError, ArithmeticError):
    """Numerical failure while evaluating a Laplace exponent."""


class BudgetExceededError(LevyMapsError, RuntimeError):
    """A computation would exceed its work budget.

    ``partial`` holds whatever was completed before stopping.
    """

    def __init__(self, message, partial=None, **info):
        super().__init__(message)
        self.partial = partial
        self.info = info
