class QuadTextError(ValueError):
    """Base class for all errors raised by this package."""


class InvalidInputError(QuadTextError):
    pass


class DegenerateResultError(QuadTextError):
    """An operation produced a polygon with no usable area."""


class FormatError(QuadTextError):
    pass


class ParseError(FormatError):
    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line
