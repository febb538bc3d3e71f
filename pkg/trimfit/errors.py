"""Error types raised by trimfit"""
from typing import Optional


class TrimFitError(Exception):
    """Base class for all trimfit errors"""


class InvalidArgumentError(TrimFitError, ValueError):
    """An argument violates a documented precondition"""


class TooFewPointsError(InvalidArgumentError):
    """Not enough correspondences for the requested solver"""

    def __init__(self, solver: str, required: int, got: int):
        super().__init__(f"{solver} requires at least {required} correspondences, got {got}")
        self.solver = solver
        self.required = required
        self.got = got


class DegenerateGeometryError(TrimFitError, RuntimeError):
    """The input geometry does not determine a unique solution"""


class SceneFormatError(InvalidArgumentError):
    """A scene file could not be parsed"""

    def __init__(self, message: str, line_number: Optional[int] = None):
        if line_number is not None:
            message = f"line {line_number}: {message}"
        super().__init__(message)
        self.line_number = line_number
