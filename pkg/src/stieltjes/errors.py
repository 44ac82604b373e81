"""Exception hierarchy shared by all modules."""

from __future__ import annotations


class StieltjesError(Exception):
    """Base class for every error raised by this package."""


class ArgumentError(StieltjesError, ValueError):
    """A caller passed arguments that violate an operation's precondition."""


class DomainError(StieltjesError, ValueError):
    """A time lies outside the working window of a derivator."""


class EvaluationError(StieltjesError, ArithmeticError):
    """A scalar evaluation produced an invalid value.

    ``where`` carries the offending time or subexpression when known.
    """

    def __init__(self, message: str, where=None):
        super().__init__(message)
        self.where = where


class ResonanceError(StieltjesError, ArithmeticError):
    """``1 + p(t) * gap(t) <= 0`` at a jump, so the g-exponential is undefined."""

    def __init__(self, time: float, factor: float):
        super().__init__(f"nonresonance violated at t={time!r}: 1 + p*gap = {factor!r}")
        self.time = time
        self.factor = factor


class ExprSyntaxError(StieltjesError, ValueError):
    """Malformed expression source; ``offset`` is the byte offset of the problem."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at offset {offset})")
        self.offset = offset


class ConfigError(StieltjesError, ValueError):
    """Invalid scenario configuration. ``path`` points at the offending key."""

    def __init__(self, message: str, path: str = ""):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path
