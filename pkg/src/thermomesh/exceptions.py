"""Exception types shared across the package."""


class ValidationError(ValueError):
    """Invalid geometry, material, or configuration input."""


class DomainError(ValueError):
    """Evaluation requested outside a model's defined temperature domain."""


class StalenessError(RuntimeError):
    """A temperature-dependent system was used with a different field than it
    was assembled at."""


class DegenerateResponseError(RuntimeError):
    """A response that must be strictly positive came out non-positive."""
