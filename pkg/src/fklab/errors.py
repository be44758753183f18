"""Exception types shared across the package."""


class EnumerationCapExceeded(RuntimeError):
    """Raised when a graph has more edges than the exact-enumeration cap allows."""


class DegenerateConditioningError(ValueError):
    """Raised when conditioning on an edge state that has probability 0 or 1."""
