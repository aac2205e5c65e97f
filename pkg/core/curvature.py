import dataclasses

import numpy as np

from core.linalg import Matrix, as_matrix
from utils.errors import ContractError, ShapeError


@dataclasses.dataclass(frozen=True, eq=False)
class KroneckerCurvature:
    """One layer's curvature block approximated as U (x) G

    Attributes:
        U: d_i x d_i input-side factor (symmetric PSD)
        G: d_o x d_o output-gradient-side factor (symmetric PSD)
    """

    U: Matrix
    G: Matrix

    @property
    def d_in(self) -> int:
        return self.U.shape[0]

    @property
    def d_out(self) -> int:
        return self.G.shape[0]

    def rescaled(self, alpha: float) -> "KroneckerCurvature":
        """(alpha U, G / alpha): the same Kronecker product, split differently"""
        return KroneckerCurvature(alpha * self.U, self.G / alpha)


def linear_layer_curvature(inputs, out_grads) -> KroneckerCurvature:
    """Kronecker factors of a linear layer from a batch of hooks

    Args:
        inputs: m x d_i batch of layer inputs u (bias coordinate included)
        out_grads: m x d_o batch of per-example loss gradients g with
            respect to the layer output

    Returns:
        KroneckerCurvature with U = mean(u u^T) and G = mean(g g^T)
    """
    inputs, out_grads = as_matrix(inputs), as_matrix(out_grads)
    if inputs.shape[0] == 0 or out_grads.shape[0] == 0:
        raise ContractError("Curvature needs a nonempty batch")
    if inputs.shape[0] != out_grads.shape[0]:
        raise ShapeError(
            f"Batch sizes differ: {inputs.shape[0]} inputs vs "
            f"{out_grads.shape[0]} output gradients"
        )
    batch = inputs.shape[0]
    U = inputs.T @ inputs / batch
    G = out_grads.T @ out_grads / batch
    # exact symmetry, the projections downstream check it
    return KroneckerCurvature(0.5 * (U + U.T), 0.5 * (G + G.T))


def ema_update(prev: Matrix, fresh: Matrix, beta1: float) -> Matrix:
    """(1 - beta1) * prev + beta1 * fresh"""
    prev, fresh = as_matrix(prev), as_matrix(fresh)
    if prev.shape != fresh.shape:
        raise ShapeError(f"Cannot average {prev.shape} with {fresh.shape}")
    if not 0.0 <= beta1 <= 1.0:
        raise ContractError(f"EMA weight must lie in [0, 1], got {beta1}")
    return (1.0 - beta1) * prev + beta1 * fresh
