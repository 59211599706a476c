"""Exception hierarchy shared by every module."""


class OeeBenchError(Exception):
    """Base class for all package errors."""


class DomainError(OeeBenchError, ValueError):
    """An argument lies outside the domain of the operation."""


class SchemaError(DomainError):
    """Tabular input does not match the expected column layout."""


class DataError(OeeBenchError):
    """Input data could not be read or parsed."""


class ModelError(OeeBenchError):
    """A learner failed to fit, converge, or load."""


class DivergenceError(ModelError):
    """Training produced a non-finite loss."""

    def __init__(self, epoch: int, message: str | None = None):
        self.epoch = epoch
        super().__init__(message or f"non-finite loss at epoch {epoch}")


class ConfigError(OeeBenchError):
    """An experiment or generator configuration is invalid."""
