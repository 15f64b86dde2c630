"""Exception and warning types shared across the package."""


class ContractError(ValueError):
    """An argument violates a documented precondition (shape, sign, ...)."""


class PotentialEvaluationError(ArithmeticError):
    """A potential or forward map produced a non-finite value."""

    def __init__(self, message, point=None):
        super().__init__(message)
        self.point = point


class UndefinedRatioError(ZeroDivisionError):
    """A ball-mass ratio has no hits (or zero weight) in its denominator."""


class NumericalWarning(RuntimeWarning):
    """A value saturated or an estimate is low-confidence."""
