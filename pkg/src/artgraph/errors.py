"""Exception hierarchy shared across the package."""


class ArtGraphError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(ArtGraphError):
    """Input violates a documented precondition."""


class SchemaError(ArtGraphError):
    """Edge insertion violates the (source label, type, target label) schema."""


class NotFoundError(ArtGraphError):
    """Referenced node does not exist."""


class FormatError(ArtGraphError):
    """Persisted file is malformed: bad magic, version, or truncation."""


class LeakageError(ValidationError):
    """Validation/test entities leaked into a training-only artifact."""
