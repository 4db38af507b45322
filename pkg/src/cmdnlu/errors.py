"""Exception types shared across the package."""


class CmdNluError(Exception):
    """Base class for all package errors."""


class SchemaError(CmdNluError, ValueError):
    """Unknown action or slot, or a malformed schema file."""


class ValidationError(CmdNluError, ValueError):
    """A value violates a documented invariant."""


class ParseError(CmdNluError, ValueError):
    """A file could not be parsed."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class ConfigurationError(CmdNluError, ValueError):
    """Pipeline or checkpoint configuration is inconsistent."""


class TrainingError(CmdNluError, RuntimeError):
    """Training could not proceed (e.g. no usable records)."""
