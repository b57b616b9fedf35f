"""Exception hierarchy shared by the library and the command line."""


class IfsCubError(Exception):
    """Base class for every error raised by ifscub."""


class ValidationError(IfsCubError, ValueError):
    """Invalid input, or a call that violates an operation's preconditions."""


class ConfigError(ValidationError):
    """A fractal configuration does not match the schema.

    The JSON path of the offending entry is kept in `path` and prefixed to the message.
    """

    path: str

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


class NumericalError(IfsCubError, ArithmeticError):
    """A numerical procedure failed: no convergence, a residual above tolerance, a singular system."""


class OutputError(IfsCubError, OSError):
    """Results could not be written."""
