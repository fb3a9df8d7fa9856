"""Exception types shared across the package.

The CLI maps ``ValidationError`` to exit code 1 and ``NumericalError`` to
exit code 2.
"""


class ValidationError(ValueError):
    """Input, configuration or artifact precondition violated."""


class NumericalError(ArithmeticError):
    """Non-finite values or a solver that failed to converge."""


class ConvergenceError(NumericalError):
    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = list(trace) if trace is not None else []


class MissingArtifactError(ValidationError):
    def __init__(self, path, producer):
        super().__init__(f"missing artifact {path}; run `agitation {producer}` first")
        self.path = path
        self.producer = producer
