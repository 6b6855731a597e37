"""Exception hierarchy shared by all specforge modules."""


class SpecforgeError(Exception):
    """Base class for every error raised by specforge."""


class DimensionError(SpecforgeError, ValueError):
    """Operator or state shapes / tensor spaces do not match."""


class ValidationError(SpecforgeError, ValueError):
    """An input violates a physical or structural precondition."""


class DivergenceError(SpecforgeError, ArithmeticError):
    """Time integration produced NaN or Inf."""

    def __init__(self, message: str, step: int | None = None):
        super().__init__(message)
        self.step = step


class DegenerateSteadyStateError(SpecforgeError):
    """The Liouvillian kernel is not one-dimensional."""

    def __init__(self, dimension: int):
        super().__init__(
            f"Liouvillian null space has dimension {dimension}; the steady state is not unique"
        )
        self.dimension = dimension


class DiagramParseError(SpecforgeError, ValueError):
    """The diagram DSL text is malformed or describes an impossible pathway."""

    def __init__(self, message: str, position: int | None = None):
        if position is not None:
            message = f"{message} (at position {position})"
        super().__init__(message)
        self.position = position


class FormatError(SpecforgeError, ValueError):
    """A file or array does not follow the expected layout."""


class ConfigError(SpecforgeError):
    """A run configuration is incomplete or inconsistent."""


class RenderError(SpecforgeError):
    """A spectrum could not be rendered to an image."""
