"""Exception hierarchy shared by all modules."""

from __future__ import annotations


class HJError(Exception):
    """Base class for every error raised by :mod:`hjbilateral`."""


class NonFiniteError(HJError, ValueError):
    def __init__(self, message: str, index: int | None = None):
        super().__init__(message)
        self.index = index


class OverflowGuardError(HJError, FloatingPointError):
    """An exponent would exceed the representable range of a float."""

    def __init__(self, message: str, index: int | None = None, exponent: float | None = None):
        super().__init__(message)
        self.index = index
        self.exponent = exponent


class FeasibilityError(HJError, ValueError):
    """The argument of a logarithmic inverse left the admissible region."""

    def __init__(self, message: str, minimum: float, index: int, time: float | None = None):
        super().__init__(message)
        self.minimum = minimum
        self.index = index
        self.time = time


class DomainError(HJError, ValueError):
    """A kernel or special function was evaluated outside its domain."""


class GridMismatchError(HJError, ValueError):
    pass


class TruncationError(HJError, ArithmeticError):
    """The power series did not reach the requested term tolerance."""

    def __init__(self, message: str, last_term: float):
        super().__init__(message)
        self.last_term = last_term


class ReferenceInfeasibleError(HJError, ValueError):
    def __init__(self, message: str, time: float | None = None):
        super().__init__(message)
        self.time = time


class DivergenceError(HJError, ArithmeticError):
    def __init__(self, message: str, time: float):
        super().__init__(message)
        self.time = time


class ConfigError(HJError, ValueError):
    def __init__(self, message: str, line: int | None = None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line
