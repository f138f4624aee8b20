"""Exception types raised across the package."""


class InvalidInputError(ValueError):
    """An argument violates an operation's preconditions."""


class NumericFailure(ArithmeticError):
    """A non-finite value appeared inside an iteration."""

    def __init__(self, message, iteration=None):
        super().__init__(message)
        self.iteration = iteration


class ParseError(ValueError):
    """A data or config file could not be parsed."""

    def __init__(self, message, path=None, line=None):
        where = ""
        if path is not None:
            where = f"{path}"
            if line is not None:
                where += f":{line}"
            where += ": "
        super().__init__(where + message)
        self.path = path
        self.line = line


class BoundViolation(AssertionError):
    """A certified convergence bound failed on a trace row."""

    def __init__(self, message, row=None):
        super().__init__(message)
        self.row = row


class ReducedAccuracyWarning(RuntimeWarning):
    """An iterative inner solver stopped at max_iter before reaching tolerance."""
