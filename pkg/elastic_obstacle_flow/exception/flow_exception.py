class FlowException(Exception):
    exit_code = 1

    def __init__(self, message):
        super().__init__(message)
        self.message = message

    def to_dict(self):
        return {"error": type(self).__name__, "message": self.message, "exit_code": self.exit_code}


class DomainError(FlowException):
    """An argument lies outside the domain of the operation."""
    exit_code = 2


class ResolutionError(FlowException):
    exit_code = 2


class GridMismatchError(FlowException):
    exit_code = 2


class DegenerateDatumError(FlowException):
    """A flat initial datum leaves the automatic horizon undefined."""
    exit_code = 2


class InfeasibleStartError(FlowException):
    exit_code = 2


class ConfigurationError(FlowException):
    exit_code = 2


class NonConvergenceError(FlowException):
    exit_code = 3


class CapViolationError(FlowException):
    """A step left the derivative cap |u'| <= 2 M0."""
    exit_code = 4


class InvariantViolationError(FlowException):
    exit_code = 4
