"""Exception hierarchy. The CLI maps each family to an exit code."""


class RiskFiltError(Exception):
    exit_code = 3
    kind = "error"


class ValidationError(RiskFiltError, ValueError):
    exit_code = 1
    kind = "validation"


class NonPositiveDefinite(ValidationError):
    kind = "NonPositiveDefinite"


class ZeroLambda22(ValidationError):
    kind = "ZeroLambda22"


class ConditionViolated(RiskFiltError):
    exit_code = 2
    kind = "ConditionViolated"


class SingularPhi1(ConditionViolated):
    kind = "SingularPhi1"


class NegativeDiagonal(ConditionViolated):
    kind = "NegativeDiagonal"


class Blowup(ConditionViolated):
    """A Riccati solution exceeded the blow-up cap."""

    kind = "Blowup"

    def __init__(self, message, time=None, partial=None):
        super().__init__(message)
        self.time = time
        self.partial = partial


class NonFinite(RiskFiltError, ArithmeticError):
    exit_code = 3
    kind = "NonFinite"
