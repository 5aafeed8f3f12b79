from typing import Optional


class FracvarError(Exception):
    """Base class for every error raised by fracvar."""


# Validation errors (exit code 1)
class ValidationError(FracvarError):
    pass


class InvalidParam(ValidationError):
    pass


class DomainError(ValidationError):
    pass


class HypothesisViolation(ValidationError):
    pass


class ExpressionError(ValidationError):
    def __init__(self, message: str, offset: Optional[int] = None):
        self.offset = offset
        if offset is not None:
            message = f"{message} (at offset {offset})"
        super().__init__(message)


class ExpressionSyntaxError(ExpressionError):
    pass


class UnknownIdentifier(ExpressionError):
    pass


class DisallowedVariable(ExpressionError):
    pass


class DomainFault(ExpressionError):
    pass


class UnboundVariable(ExpressionError):
    pass


# Numerical failures (exit code 2)
class NumericalError(FracvarError):
    pass


class NonConvergent(NumericalError):
    pass


class SingularOrder(NumericalError):
    pass


class QuadratureFailure(NumericalError):
    pass


class DegenerateGrid(NumericalError):
    pass


class NewtonDivergence(NumericalError):
    def __init__(self, node: int, message: str = "Newton iteration diverged"):
        self.node = node
        super().__init__(f"{message} at node {node}")


# Suite-level outcomes
class BoundViolation(FracvarError):
    def __init__(self, node: int, report=None):
        self.node = node
        self.report = report
        super().__init__(f"Sandwich bound violated first at node {node}")


class DegenerateCase(FracvarError):
    pass


class NoInteriorMax(FracvarError):
    pass
