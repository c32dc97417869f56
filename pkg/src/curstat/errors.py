class InvalidInputError(ValueError):
    """Raised when an argument violates a documented precondition."""


class InvalidStateError(RuntimeError):
    """Raised when an iterate leaves the region where an update is defined."""
