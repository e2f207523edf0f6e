"""Exception types shared across the package."""


class ConfigurationError(ValueError):
    """Inconsistent shapes, widths or settings."""


class DomainError(ValueError):
    """Argument outside the mathematical domain of a function."""


class DataError(ValueError):
    """Malformed or inconsistent input data."""


class ParseError(DataError):
    def __init__(self, message, line=None, path=None):
        self.line = line
        self.path = path
        where = ""
        if path is not None:
            where += f"{path}"
        if line is not None:
            where += f":{line}"
        super().__init__(f"{where}: {message}" if where else message)


class NumericalError(ArithmeticError):
    """A non-finite value appeared in a computation graph."""

    def __init__(self, message, node=None):
        self.node = node
        super().__init__(message)


class TrainingDiverged(RuntimeError):
    """Training loss went non-finite; ``params`` holds the last good state."""

    def __init__(self, message, params=None, history=None):
        self.params = params
        self.history = history
        super().__init__(message)
