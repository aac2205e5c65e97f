"""
Kronecker quadratic: a single d_o x d_i weight matrix with loss

    l(W) = 1/2 vec(W)^T (A (x) B) vec(W) - tr(b^T W)

whose Hessian is exactly A (x) B, so the curvature fed to the optimizers
can be the true one.
"""

import dataclasses
import logging
from typing import NamedTuple, Optional, Tuple

import numpy as np

from core.curvature import KroneckerCurvature
from core.linalg import dense_inverse
from utils.errors import ContractError, ShapeError

logger = logging.getLogger(__name__)


@dataclasses.dataclass(frozen=True, eq=False)
class KroneckerQuadratic:
    """A = M_A^T M_A + eps I (d_i x d_i), B = M_B^T M_B + eps I (d_o x d_o)"""

    A: np.ndarray
    B: np.ndarray
    b: np.ndarray
    M_A: np.ndarray
    M_B: np.ndarray
    epsilon: float

    @property
    def d_in(self) -> int:
        return self.A.shape[0]

    @property
    def d_out(self) -> int:
        return self.B.shape[0]

    @property
    def shape(self) -> Tuple[int, int]:
        return self.d_out, self.d_in


class QuadraticEval(NamedTuple):
    loss: float
    grad: np.ndarray
    curvature: KroneckerCurvature


def _factor_with_spectrum(eigenvalues: np.ndarray, epsilon: float, rng) -> np.ndarray:
    """M with M^T M + eps I having the given eigenvalues in a random basis"""
    d = eigenvalues.shape[0]
    q, _ = np.linalg.qr(rng.normal(size=(d, d)))
    return np.sqrt(eigenvalues - epsilon)[:, None] * q.T


def make_kronecker_quadratic(
    d_in: int, d_out: int, condition: float = 100.0, seed: int = 0
) -> KroneckerQuadratic:
    """Random quadratic with cond(A (x) B) = condition

    A and B each get condition number sqrt(condition), with geometrically
    spaced eigenvalues whose largest is 1. The target b is chosen so the
    optimum W* = B^-1 b A^-1 has standard normal entries.

    Args:
        d_in: Size of A
        d_out: Size of B
        condition: Condition number of the Kronecker product, >= 1
        seed: Seed for the eigenbases and the optimum

    Returns:
        The quadratic task
    """
    if d_in < 1 or d_out < 1:
        raise ContractError("Quadratic dimensions must be positive")
    if condition < 1.0:
        raise ContractError(f"Condition number must be >= 1, got {condition}")
    rng = np.random.default_rng(seed)
    side = np.sqrt(condition)

    def spectrum(d: int) -> np.ndarray:
        if d == 1:
            return np.ones(1)
        return np.geomspace(1.0 / side, 1.0, d)

    eig_A, eig_B = spectrum(d_in), spectrum(d_out)
    epsilon = 0.5 * min(eig_A.min(), eig_B.min())
    M_A = _factor_with_spectrum(eig_A, epsilon, rng)
    M_B = _factor_with_spectrum(eig_B, epsilon, rng)
    A = M_A.T @ M_A + epsilon * np.eye(d_in)
    B = M_B.T @ M_B + epsilon * np.eye(d_out)
    A, B = 0.5 * (A + A.T), 0.5 * (B + B.T)

    optimum = rng.normal(size=(d_out, d_in))
    b = B @ optimum @ A
    logger.debug(f"Kronecker quadratic {d_out}x{d_in}, condition {condition:.3g}")
    return KroneckerQuadratic(A, B, b, M_A, M_B, float(epsilon))


def _check_weights(task: KroneckerQuadratic, W: np.ndarray) -> np.ndarray:
    W = np.asarray(W)
    if W.shape != task.shape:
        raise ShapeError(f"Weights of shape {W.shape} do not match task shape {task.shape}")
    return W


def kronecker_quadratic_eval(task: KroneckerQuadratic, W) -> QuadraticEval:
    """Loss, gradient B W A - b and the exact curvature (A, B)"""
    W = _check_weights(task, W)
    BWA = task.B @ W @ task.A
    loss = 0.5 * float(np.sum(W * BWA)) - float(np.sum(task.b * W))
    return QuadraticEval(loss, BWA - task.b, KroneckerCurvature(task.A, task.B))


def kronecker_quadratic_optimum(task: KroneckerQuadratic) -> np.ndarray:
    """W* = B^-1 b A^-1 via the Gauss-Jordan oracle"""
    return dense_inverse(task.B) @ task.b @ dense_inverse(task.A)


def kronecker_quadratic_samples(task: KroneckerQuadratic) -> Tuple[np.ndarray, np.ndarray]:
    """Input and output-gradient batches whose outer-product means are A and B

    Both batches have n = 2 max(d_i, d_o) rows: the rows of M, then sqrt(eps)
    times the identity, then zero padding, all scaled by sqrt(n).
    """
    n = 2 * max(task.d_in, task.d_out)

    def rows(M: np.ndarray) -> np.ndarray:
        d = M.shape[1]
        batch = np.zeros((n, d))
        batch[:d] = M
        batch[d : 2 * d] = np.sqrt(task.epsilon) * np.eye(d)
        return np.sqrt(n) * batch

    return rows(task.M_A), rows(task.M_B)


def relative_distance_to_optimum(task: KroneckerQuadratic, W, optimum: Optional[np.ndarray] = None) -> float:
    """||W - W*|| / ||W*||; pass a precomputed optimum to skip the two inversions"""
    W = _check_weights(task, W)
    if optimum is None:
        optimum = kronecker_quadratic_optimum(task)
    return float(np.linalg.norm(W - optimum) / max(np.linalg.norm(optimum), 1e-300))
