"""
KFAC reference optimizer: exponential moving averages of the Kronecker
factors, inverted explicitly after damping.
"""

import logging

import numpy as np

from core.curvature import KroneckerCurvature, ema_update
from core.linalg import dense_inverse, frobenius_norm, identity
from optimizers.state import LayerOptState
from utils.errors import ContractError

logger = logging.getLogger(__name__)


def kfac_accumulate(state: LayerOptState, curv: KroneckerCurvature, cfg) -> LayerOptState:
    """S_K <- (1 - beta1) S_K + beta1 U and S_C <- (1 - beta1) S_C + beta1 G

    The cached inverses are left untouched.
    """
    policy = cfg.precision
    S_K = ema_update(policy.load(state.S_K), policy.load(curv.U), cfg.beta1)
    S_C = ema_update(policy.load(state.S_C), policy.load(curv.G), cfg.beta1)
    return state.copy_with(
        S_K=policy.store(S_K, "factor_state"),
        S_C=policy.store(S_C, "factor_state"),
    )


def _damped_inverse(s: np.ndarray, damping: float, policy) -> np.ndarray:
    """(S + lambda I)^-1 with the damped factor and every elimination step
    held in the storage format"""
    damped = policy.store(s + damping * identity(s.shape[0], s.dtype), "factor_state")
    return dense_inverse(damped, rounding=policy.rounding("factor_state"))


def kfac_invert(state: LayerOptState, cfg) -> LayerOptState:
    """Refresh the cached inverses (S + lambda I)^-1 of both factors

    Raises:
        SingularMatrixError: if either damped factor cannot be inverted
    """
    policy = cfg.precision
    S_K_inv = _damped_inverse(policy.load(state.S_K), cfg.damping, policy)
    S_C_inv = _damped_inverse(policy.load(state.S_C), cfg.damping, policy)
    return state.copy_with(
        S_K_inv=policy.store(S_K_inv, "factor_state"),
        S_C_inv=policy.store(S_C_inv, "factor_state"),
    )


def kfac_precond_update(state: LayerOptState, curv: KroneckerCurvature, cfg) -> LayerOptState:
    """Average in this step's curvature, then recompute the damped inverses

    Args:
        state: KFAC layer state
        curv: Curvature factors (U, G) of this step
        cfg: OptimizerConfig

    Returns:
        Updated state

    Raises:
        SingularMatrixError: if a damped factor is singular
    """
    if state.name != "kfac":
        raise ContractError(f"kfac_precond_update needs a kfac state, got {state.name}")
    return kfac_invert(kfac_accumulate(state, curv, cfg), cfg)


def kfac_direction(state: LayerOptState, grad: np.ndarray) -> np.ndarray:
    """S_C^-1 G S_K^-1"""
    return state.S_C_inv @ grad @ state.S_K_inv


def preconditioner_residual(state: LayerOptState, cfg) -> float:
    """max over both sides of ||(S + lambda I) S^-1 - I||_F

    Measures how far the stored inverse is from inverting the stored factor;
    computed in float64 from the stored values.
    """
    if state.name != "kfac":
        raise ContractError("Preconditioner residual is defined for KFAC states only")
    residuals = []
    for s, s_inv in ((state.S_K, state.S_K_inv), (state.S_C, state.S_C_inv)):
        s = np.asarray(s, dtype=np.float64)
        damped = s + cfg.damping * np.eye(s.shape[0])
        product = damped @ np.asarray(s_inv, dtype=np.float64)
        residuals.append(frobenius_norm(product - np.eye(s.shape[0])))
    return float(max(residuals))
