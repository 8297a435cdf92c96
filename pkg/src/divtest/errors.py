"""Exception hierarchy.

Every error raised by the library derives from :class:`DivtestError`. The CLI
maps the three families below onto exit codes (2, 3, 4).
"""


class DivtestError(Exception):
    """Base class for all library errors."""


class ValidationError(DivtestError, ValueError):
    """Bad input: wrong shape, out-of-range parameter, invalid distribution."""


class BudgetExceeded(DivtestError):
    """An exact enumeration or grid scan would exceed its work budget."""


class MathDomainError(DivtestError, ArithmeticError):
    """Inputs are valid but outside the region where a construction applies."""


class NonPositiveEntry(ValidationError):
    pass


class NotNormalized(ValidationError):
    pass


class SymbolOutOfRange(ValidationError):
    pass


class DimensionMismatch(ValidationError):
    pass


class InvalidAlpha(ValidationError):
    pass


class EqualDistributions(ValidationError):
    pass


class NonPositiveArgument(ValidationError):
    pass


class NegativeArgument(ValidationError):
    pass


class ProbOutOfRange(ValidationError):
    pass


class MarginTooLarge(ValidationError):
    pass


class DegenerateGrid(ValidationError):
    pass


class RadiusTooLarge(MathDomainError):
    pass


class NTooSmall(MathDomainError):
    """Raised when n is below the admissibility threshold of the rounding step.

    ``min_n`` carries the smallest admissible sample size.
    """

    def __init__(self, message: str, min_n: int):
        super().__init__(message)
        self.min_n = min_n
