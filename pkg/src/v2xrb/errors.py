"""Exception hierarchy shared by every module."""


class V2XError(Exception):
    """Base class for all errors raised by this package."""


class ParameterError(V2XError, ValueError):
    """A parameter or configuration value violates its invariant."""

    def __init__(self, message, fields=None):
        super().__init__(message)
        self.fields = list(fields or [])


class ConfigError(ParameterError):
    """Run configuration could not be loaded or validated."""


class ContractViolation(V2XError, ValueError):
    """An operation was called with inputs outside its precondition."""
