"""Error types raised by the remainder lab services."""


class LagrangeLabError(RuntimeError):
    """Base class for every error raised by the services."""


class ExpressionSyntaxError(LagrangeLabError):
    def __init__(self, message: str, position: int):
        super().__init__(f"{message} at position {position}")
        self.position = position


class UnknownIdentifierError(ExpressionSyntaxError):
    def __init__(self, name: str, position: int):
        super().__init__(f"unknown identifier '{name}'", position)
        self.name = name


class DomainError(LagrangeLabError):
    """Expression evaluated outside its domain (ln of t <= 0, division by zero, ...)."""


class NoRootFoundError(LagrangeLabError):
    pass


class TableauError(LagrangeLabError):
    pass


class NonFiniteStateError(LagrangeLabError):
    def __init__(self, x: float, stage: int | None = None):
        where = f"stage {stage} of the step at x={x!r}" if stage is not None else f"x={x!r}"
        super().__init__(f"non-finite state in {where}")
        self.x = x
        self.stage = stage


class SingularityError(LagrangeLabError):
    def __init__(self, message: str, x: float, xi: float):
        super().__init__(f"{message} (x={x!r}, xi={xi!r})")
        self.x = x
        self.xi = xi


class MismatchedGridError(LagrangeLabError):
    pass


class SegmentUncoveredError(LagrangeLabError):
    pass


class TooFewPointsError(LagrangeLabError):
    pass


class NonIncreasingKnotsError(LagrangeLabError):
    pass


class OutOfRangeError(LagrangeLabError):
    pass


class NonUniformGridError(LagrangeLabError):
    pass


class InvalidFigureError(LagrangeLabError):
    pass


class ConfigError(LagrangeLabError):
    """Experiment config failed to load or validate; `errors` maps field -> messages."""

    def __init__(self, message: str, errors: dict | None = None):
        super().__init__(message)
        self.errors = errors or {}


class StageError(LagrangeLabError):
    """Numerical failure inside one stage of an experiment."""

    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"stage '{stage}' failed: {cause}")
        self.stage = stage
        self.cause = cause
