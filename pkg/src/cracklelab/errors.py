"""Exception types shared across the package."""


class DomainError(ValueError):
    """An input lies outside a formula's domain (e.g. a non-positive inner log)."""


class QuadratureError(RuntimeError):
    """Adaptive quadrature failed to converge to the requested tolerance."""


class ResourceError(RuntimeError):
    """A computation would exceed an explicit resource budget (grid size, simplex count)."""
