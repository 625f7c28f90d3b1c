"""Shared exception types."""


class ParseError(ValueError):
    """Malformed text input; carries the 1-based line number when known."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class TooLargeError(RuntimeError):
    """A requested exact computation exceeds the configuration-count cap."""


class UnsupportedConditionalError(ValueError):
    """A formula conditions on an event of probability zero."""
