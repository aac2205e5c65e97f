"""
Dense linear algebra for the optimizer kernels.

A Matrix is a 2-D numpy array of real scalars. The dtype of the inputs is
the accumulation format: float64 unless a PrecisionPolicy has loaded the
operands as float32, and every function here preserves it.
"""

from typing import Callable, Optional

import numpy as np

from config import PIVOT_TOLERANCE, SYMMETRY_TOLERANCE
from utils.errors import ContractError, ShapeError, SingularMatrixError

Matrix = np.ndarray


def as_matrix(x) -> Matrix:
    """Coerce to a 2-D float array, promoting integers to float64"""
    arr = np.asarray(x)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    if arr.ndim != 2:
        raise ShapeError(f"Expected a 2-D matrix, got {arr.ndim} dimensions")
    if not np.issubdtype(arr.dtype, np.floating):
        arr = arr.astype(np.float64)
    return arr


def _require_square(m: Matrix, op: str) -> Matrix:
    m = as_matrix(m)
    if m.shape[0] != m.shape[1]:
        raise ShapeError(f"{op} needs a square matrix, got {m.shape[0]}x{m.shape[1]}")
    return m


def identity(n: int, dtype=np.float64) -> Matrix:
    return np.eye(n, dtype=dtype)


def matmul(a: Matrix, b: Matrix) -> Matrix:
    """Dense product a @ b in the dtype of the operands"""
    a, b = as_matrix(a), as_matrix(b)
    if a.shape[1] != b.shape[0]:
        raise ShapeError(
            f"Cannot multiply {a.shape[0]}x{a.shape[1]} by {b.shape[0]}x{b.shape[1]}"
        )
    return a @ b


def transpose(m: Matrix) -> Matrix:
    return as_matrix(m).T.copy()


def trace(m: Matrix) -> float:
    return float(np.trace(_require_square(m, "trace")))


def frobenius_norm(m: Matrix) -> float:
    return float(np.linalg.norm(as_matrix(m), ord="fro"))


def symmetrize(m: Matrix) -> Matrix:
    m = _require_square(m, "symmetrize")
    return 0.5 * (m + m.T)


def is_finite(m) -> bool:
    return bool(np.all(np.isfinite(np.asarray(m))))


def is_symmetric(m: Matrix, rtol: float = SYMMETRY_TOLERANCE) -> bool:
    """Symmetry check relative to the largest entry magnitude"""
    m = as_matrix(m)
    if m.shape[0] != m.shape[1]:
        return False
    scale = max(float(np.max(np.abs(m))) if m.size else 0.0, 1.0)
    return bool(np.max(np.abs(m - m.T), initial=0.0) <= rtol * scale)


def require_symmetric(m: Matrix, op: str) -> Matrix:
    m = _require_square(m, op)
    if not is_symmetric(m):
        raise ContractError(f"{op} needs a symmetric matrix")
    return m


def truncated_expm(m: Matrix, scale: float, order: int = 1) -> Matrix:
    """Truncated Taylor series of Expm(scale * m)

    Args:
        m: Square matrix
        scale: Multiplier applied to m before exponentiation
        order: 1 for I + s*m, 2 for I + s*m + s^2/2 * m^2

    Returns:
        The truncated exponential in the dtype of m
    """
    m = _require_square(m, "truncated_expm")
    if order not in (1, 2):
        raise ContractError(f"Truncation order must be 1 or 2, got {order}")
    result = identity(m.shape[0], m.dtype) + scale * m
    if order == 2:
        result = result + (0.5 * scale * scale) * (m @ m)
    return result


def dense_inverse(a: Matrix, rounding: Optional[Callable[[Matrix], Matrix]] = None) -> Matrix:
    """Gauss-Jordan inversion with partial pivoting

    Used by the KFAC reference optimizer and by test oracles only.

    Args:
        a: Square matrix
        rounding: Applied to the working tableau after every row operation,
            to emulate elimination carried out in a narrow storage format

    Returns:
        The inverse of a

    Raises:
        SingularMatrixError: if a pivot falls below PIVOT_TOLERANCE * max|a|
    """
    a = _require_square(a, "dense_inverse")
    n = a.shape[0]
    dtype = a.dtype
    work = np.concatenate([a.astype(dtype, copy=True), identity(n, dtype)], axis=1)
    if rounding is not None:
        work = rounding(work)
    scale = float(np.max(np.abs(a))) if a.size else 0.0
    tolerance = PIVOT_TOLERANCE * scale

    for col in range(n):
        pivot_row = col + int(np.argmax(np.abs(work[col:, col])))
        magnitude = float(abs(work[pivot_row, col]))
        if not np.isfinite(magnitude) or magnitude <= tolerance or magnitude == 0.0:
            raise SingularMatrixError(col, magnitude)
        if pivot_row != col:
            work[[col, pivot_row]] = work[[pivot_row, col]]
        work[col] = work[col] / work[col, col]
        if rounding is not None:
            work = rounding(work)
        factors = work[:, col].copy()
        factors[col] = 0.0
        work -= np.outer(factors, work[col])
        if rounding is not None:
            work = rounding(work)

    return work[:, n:]


def kron(a: Matrix, b: Matrix) -> Matrix:
    """Kronecker product, oracle use only"""
    a, b = as_matrix(a), as_matrix(b)
    rows = a.shape[0] * b.shape[0]
    cols = a.shape[1] * b.shape[1]
    # (i, k, j, l) -> a[i, j] * b[k, l]
    return np.einsum("ij,kl->ikjl", a, b).reshape(rows, cols)
