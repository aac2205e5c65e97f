"""
Inverse-free Kronecker-factored updates (IKFAC and SINGD).

The preconditioner is held as K K^T (input side) and C C^T (output side).
Both factors are refined multiplicatively in their matrix Lie group,
K <- K Expm(-beta1 m_K), with the tangent step m_K projected onto the
factor's structure. INGD is SINGD with dense factors; IKFAC is SINGD
without the adaptive trace coupling and without Riemannian momentum.
"""

import logging

import numpy as np

from core import structured
from core.curvature import KroneckerCurvature
from core.linalg import identity, is_finite, trace
from optimizers.kfac import kfac_direction
from optimizers.state import LayerOptState
from utils.errors import ContractError, ShapeError

logger = logging.getLogger(__name__)


def _check_curvature(state: LayerOptState, curv: KroneckerCurvature) -> None:
    d_out, d_in = state.shape
    if curv.d_in != d_in or curv.d_out != d_out:
        raise ShapeError(
            f"Curvature ({curv.d_in}, {curv.d_out}) does not match layer "
            f"with d_i={d_in}, d_o={d_out}"
        )


def tangent_brackets(
    K: structured.StructuredFactor,
    C: structured.StructuredFactor,
    U: np.ndarray,
    G: np.ndarray,
    damping: float,
    adaptive: bool = True,
):
    """Dense symmetric brackets whose projections drive m_K and m_C

    With adaptive=True:
        K side: Tr(H_C) H_K + c^2 K^T K - d_o I,  c^2 = lambda Tr(C^T C)
        C side: Tr(H_K) H_C + k^2 C^T C - d_i I,  k^2 = lambda Tr(K^T K)
    With adaptive=False the traces Tr(H_C), Tr(C^T C) are replaced by d_o
    (and Tr(H_K), Tr(K^T K) by d_i), which turns the K bracket into
    d_o (H_K + lambda K^T K - I).

    Everything is computed from the factors passed in, so callers must pass
    the factors from before either one is updated.

    Returns:
        (bracket_K, bracket_C) as dense d_i x d_i and d_o x d_o matrices
    """
    d_in, d_out = K.dim, C.dim
    H_K = structured.congruence(K, U)
    H_C = structured.congruence(C, G)
    gram_K = structured.gram(K)
    gram_C = structured.gram(C)

    if adaptive:
        trace_H_C, trace_H_K = trace(H_C), trace(H_K)
        c_squared = damping * structured.gram_trace(C)
        kappa_squared = damping * structured.gram_trace(K)
    else:
        trace_H_C, trace_H_K = float(d_out), float(d_in)
        c_squared = damping * d_out
        kappa_squared = damping * d_in

    bracket_K = trace_H_C * H_K + c_squared * gram_K - d_out * identity(d_in, H_K.dtype)
    bracket_C = trace_H_K * H_C + kappa_squared * gram_C - d_in * identity(d_out, H_C.dtype)
    return bracket_K, bracket_C


def singd_precond_update(
    state: LayerOptState,
    curv: KroneckerCurvature,
    cfg,
    adaptive: bool = True,
) -> LayerOptState:
    """One preconditioner refresh of the inverse-free update

    m_K <- alpha1 m_K + 1/(2 d_o) Proj_K(bracket_K)
    m_C <- alpha1 m_C + 1/(2 d_i) Proj_C(bracket_C)
    K <- K (I - beta1 m_K),  C <- C (I - beta1 m_C)

    Args:
        state: IKFAC or SINGD layer state
        curv: Curvature factors (U, G) of this step
        cfg: OptimizerConfig (beta1, alpha1, damping, truncation_order, precision)
        adaptive: False substitutes the trace terms by the factor dimensions

    A non-finite bracket (overflow) leaves every factor NaN instead of
    projecting.

    Returns:
        Updated state
    """
    if state.K is None or state.C is None:
        raise ContractError(f"{state.name} state carries no K, C factors")
    _check_curvature(state, curv)
    policy = cfg.precision

    K, C = policy.load_factor(state.K), policy.load_factor(state.C)
    m_K, m_C = policy.load_factor(state.m_K), policy.load_factor(state.m_C)
    U, G = policy.load(curv.U), policy.load(curv.G)
    d_in, d_out = K.dim, C.dim

    bracket_K, bracket_C = tangent_brackets(K, C, U, G, cfg.damping, adaptive)
    if not (is_finite(bracket_K) and is_finite(bracket_C)):
        # overflowed curvature products poison the whole factor pair
        return state.copy_with(
            K=structured.scale(state.K, np.nan),
            C=structured.scale(state.C, np.nan),
            m_K=structured.scale(state.m_K, np.nan),
            m_C=structured.scale(state.m_C, np.nan),
        )
    alpha1 = cfg.alpha1
    m_K = structured.add(
        structured.scale(m_K, alpha1),
        structured.scale(structured.project(K.structure, bracket_K), 1.0 / (2 * d_out)),
    )
    m_C = structured.add(
        structured.scale(m_C, alpha1),
        structured.scale(structured.project(C.structure, bracket_C), 1.0 / (2 * d_in)),
    )

    K = structured.right_update(K, m_K, cfg.beta1, cfg.truncation_order)
    C = structured.right_update(C, m_C, cfg.beta1, cfg.truncation_order)
    return state.copy_with(
        K=policy.store_factor(K),
        C=policy.store_factor(C),
        m_K=policy.store_factor(m_K),
        m_C=policy.store_factor(m_C),
    )


def ikfac_precond_update(state: LayerOptState, curv: KroneckerCurvature, cfg) -> LayerOptState:
    """IKFAC refresh: m_K = 1/2 Proj_K(H_K + lambda K^T K - I), no momentum

    Shares its code path with singd_precond_update; the Riemannian momentum
    is forced to zero whatever the config says.
    """
    return singd_precond_update(state, curv, cfg.with_updates(alpha1=0.0), adaptive=False)


def apply_direction(
    state: LayerOptState,
    grad: np.ndarray,
    weights: np.ndarray,
    cfg,
    lr_scale: float = 1.0,
):
    """m_mu <- alpha2 m_mu + P(grad) + gamma W, then W <- W - beta2 m_mu

    P is C C^T grad K K^T for IKFAC/SINGD and S_C^-1 grad S_K^-1 for KFAC.

    Args:
        state: Preconditioned layer state
        grad: d_o x d_i gradient
        weights: d_o x d_i weights
        cfg: OptimizerConfig
        lr_scale: Schedule multiplier on beta2

    Returns:
        (new state, new weights)
    """
    if grad.shape != state.shape or weights.shape != state.shape:
        raise ShapeError(
            f"Gradient {grad.shape} and weights {weights.shape} must match "
            f"the layer shape {state.shape}"
        )
    policy = cfg.precision
    grad, weights = policy.load(grad), policy.load(weights)
    m_mu = policy.load(state.m_mu)

    if state.name == "kfac":
        loaded = state.copy_with(
            S_K_inv=policy.load(state.S_K_inv), S_C_inv=policy.load(state.S_C_inv)
        )
        direction = kfac_direction(loaded, grad)
    elif state.name in ("ikfac", "singd"):
        direction = structured.sandwich_precondition(
            policy.load_factor(state.C), grad, policy.load_factor(state.K)
        )
    else:
        raise ContractError(f"apply_direction does not handle {state.name}")

    m_mu = cfg.alpha2 * m_mu + direction + cfg.weight_decay * weights
    new_weights = weights - (cfg.beta2 * lr_scale) * m_mu
    return (
        state.copy_with(m_mu=policy.store(m_mu, "factor_state")),
        policy.store(new_weights, "parameters"),
    )
