"""
Per-layer optimizer state.

State objects are immutable values; every update returns a new state built
with dataclasses.replace, so a caller holding an older state can compare
trajectories or roll back after a failed inversion.
"""

import dataclasses
import logging
import math
from typing import Optional, Tuple

import numpy as np

from core import structured
from core.linalg import Matrix, frobenius_norm, identity
from core.structured import StructuredFactor
from utils.errors import ContractError

logger = logging.getLogger(__name__)

PRECONDITIONED = ("kfac", "ikfac", "singd")
FIRST_ORDER = ("adamw", "sgd")


@dataclasses.dataclass(frozen=True, eq=False)
class LayerOptState:
    """Optimizer state of one d_o x d_i weight matrix

    Which fields are populated depends on the optimizer: KFAC keeps the
    averaged factors S_K, S_C and their damped inverses; IKFAC and SINGD keep
    the structured factors K, C and their tangent momenta m_K, m_C; AdamW
    keeps a second-moment estimate. Every optimizer keeps the parameter
    momentum m_mu and the step counter.
    """

    name: str
    step: int
    m_mu: Matrix
    K: Optional[StructuredFactor] = None
    C: Optional[StructuredFactor] = None
    m_K: Optional[StructuredFactor] = None
    m_C: Optional[StructuredFactor] = None
    S_K: Optional[Matrix] = None
    S_C: Optional[Matrix] = None
    S_K_inv: Optional[Matrix] = None
    S_C_inv: Optional[Matrix] = None
    second_moment: Optional[Matrix] = None
    diverged: bool = False

    @property
    def shape(self) -> Tuple[int, int]:
        return self.m_mu.shape

    def copy_with(self, **changes) -> "LayerOptState":
        return dataclasses.replace(self, **changes)


def init_layer_state(name: str, cfg, d_out: int, d_in: int) -> LayerOptState:
    """Fresh state for one layer

    K and C start at the identity of their configured structures, and KFAC's
    averaged factors start at the identity as well.

    Args:
        name: Optimizer name (kfac, ikfac, singd, adamw, sgd)
        cfg: OptimizerConfig
        d_out: Rows of the weight matrix
        d_in: Columns of the weight matrix (bias coordinate included)

    Returns:
        LayerOptState at step 0
    """
    dtype = cfg.precision.dtype
    m_mu = np.zeros((d_out, d_in), dtype=dtype)

    if name == "kfac":
        return LayerOptState(
            name=name,
            step=0,
            m_mu=m_mu,
            S_K=identity(d_in, dtype),
            S_C=identity(d_out, dtype),
            S_K_inv=identity(d_in, dtype),
            S_C_inv=identity(d_out, dtype),
        )
    if name in ("ikfac", "singd"):
        structure_k = cfg.structure_k.bind(d_in)
        structure_c = cfg.structure_c.bind(d_out)
        return LayerOptState(
            name=name,
            step=0,
            m_mu=m_mu,
            K=structured.identity(structure_k, dtype),
            C=structured.identity(structure_c, dtype),
            m_K=structured.zeros(structure_k, dtype),
            m_C=structured.zeros(structure_c, dtype),
        )
    if name == "adamw":
        return LayerOptState(
            name=name, step=0, m_mu=m_mu, second_moment=np.zeros_like(m_mu)
        )
    if name == "sgd":
        return LayerOptState(name=name, step=0, m_mu=m_mu)
    raise ContractError(f"Unknown optimizer '{name}'")


def factor_norms(state: LayerOptState) -> Tuple[float, float]:
    """Frobenius norms of the K-side and C-side preconditioner factors

    KFAC reports its damped inverses, IKFAC/SINGD report K and C, and the
    first-order baselines have no factors (0.0).
    """
    if state.name == "kfac":
        return frobenius_norm(state.S_K_inv), frobenius_norm(state.S_C_inv)
    if state.name in ("ikfac", "singd"):
        return (
            math.sqrt(max(structured.gram_trace(state.K), 0.0)),
            math.sqrt(max(structured.gram_trace(state.C), 0.0)),
        )
    return 0.0, 0.0


def state_is_finite(state: LayerOptState) -> bool:
    arrays = [state.m_mu, state.S_K, state.S_C, state.S_K_inv, state.S_C_inv, state.second_moment]
    factors = [state.K, state.C, state.m_K, state.m_C]
    arrays += [f.coeffs for f in factors if f is not None]
    return all(bool(np.all(np.isfinite(a))) for a in arrays if a is not None)
