"""Exception types shared across the package."""


class InvalidInputError(ValueError):
    """Raised when an argument violates an operation's preconditions."""


class NotFoundError(LookupError):
    """Raised when a referenced node or identifier does not exist."""


class ParseError(ValueError):
    """Raised on malformed text input; message carries line/field location."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line
