"""Exception types shared across the package."""


class ParfamError(Exception):
    """Base class for all errors raised by this package."""


class DimensionMismatchError(ParfamError, ValueError):
    """Coefficient / basis / input sizes are inconsistent."""


class ZeroDenominatorError(ParfamError, ValueError):
    """All denominator coefficients are (numerically) zero."""


class NonFiniteEvaluationError(ParfamError, ArithmeticError):
    """Model evaluation produced NaN/inf despite the guards.

    Attributes:
        row: index of the first offending input row.
    """

    def __init__(self, msg: str, row: int):
        super().__init__(msg)
        self.row = row


class NumericalFailureError(ParfamError, ArithmeticError):
    """A closed-form computation failed its internal residual check."""


class DatasetFormatError(ParfamError, ValueError):
    """A CSV dataset is malformed.

    Attributes:
        row: 1-based line number of the offending row (None if structural).
    """

    def __init__(self, msg: str, row=None):
        super().__init__(msg)
        self.row = row


class ExpressionSyntaxError(ParfamError, ValueError):
    """An expression string does not conform to the serialization grammar."""


class NoCandidateError(ParfamError, RuntimeError):
    """Search exhausted its budget without producing a finite candidate."""
