"""Exception types shared across the package."""


class DomainError(ValueError):
    """Argument outside the domain where a formula is valid."""


class CapError(ValueError):
    """Request exceeds a configured enumeration or table cap."""


class ParseError(ValueError):
    """Malformed Dyck word."""

    def __init__(self, message: str, position: int):
        super().__init__(f"{message} at position {position}")
        self.position = position


class ShapeError(ValueError):
    """Tree does not have the shape an operation requires."""


class AmbiguousComparison(ValueError):
    """Distance between truncated balls cannot be decided."""


class SizeGuardError(RuntimeError):
    """A sampler exceeded its vertex budget."""
