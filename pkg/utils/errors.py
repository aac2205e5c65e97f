from typing import Optional


class SingdKitError(Exception):
    """Base class for every error raised by this package"""


class ShapeError(SingdKitError, ValueError):
    """Operand dimensions do not line up"""


class ContractError(SingdKitError, ValueError):
    """A precondition of an operation was violated"""


class SingularMatrixError(SingdKitError, ArithmeticError):
    """Gauss-Jordan elimination met a pivot below tolerance

    Args:
        pivot: Column index of the failing pivot
        magnitude: Largest candidate pivot magnitude found in that column
    """

    def __init__(self, pivot: int, magnitude: float):
        self.pivot = pivot
        self.magnitude = magnitude
        super().__init__(
            f"Matrix is singular within tolerance at pivot {pivot} "
            f"(|pivot| = {magnitude:.3e})"
        )


class ConfigError(SingdKitError, ValueError):
    """Run configuration could not be parsed or validated"""

    def __init__(
        self, message: str, line: Optional[int] = None, key: Optional[str] = None
    ):
        self.line = line
        self.key = key
        location = []
        if line is not None:
            location.append(f"line {line}")
        if key is not None:
            location.append(f"key '{key}'")
        prefix = f"[{', '.join(location)}] " if location else ""
        super().__init__(f"{prefix}{message}")
