class GanFaultError(Exception):
    """Base class for all errors raised by this package."""


class DomainError(GanFaultError, ValueError):
    """An input violates an operation's precondition."""


class NumericalError(GanFaultError, ArithmeticError):
    """An iterative routine failed to converge or produced non-finite values."""


class SimulationError(GanFaultError):
    """The closed-loop simulation left its output envelope."""

    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


class ParseError(GanFaultError, ValueError):
    """A data or model file does not match its schema."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class TrainingError(GanFaultError):
    """Training diverged."""
