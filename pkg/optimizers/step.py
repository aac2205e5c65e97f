"""
One optimizer step for one layer, dispatched on the optimizer name.

Order within a step: if the step counter is a multiple of the update
interval, the preconditioner is refreshed from this step's curvature; the
parameter direction is applied on every step; then the counter advances.
"""

import logging
from typing import List, NamedTuple, Optional

import numpy as np

from core.curvature import KroneckerCurvature
from core.linalg import is_finite
from optimizers.baselines import adamw_step, sgd_momentum_step
from optimizers.kfac import kfac_accumulate, kfac_invert
from optimizers.singd import apply_direction, ikfac_precond_update, singd_precond_update
from optimizers.state import PRECONDITIONED, LayerOptState, state_is_finite
from utils.errors import ContractError, SingularMatrixError

logger = logging.getLogger(__name__)


class StepOutcome(NamedTuple):
    state: LayerOptState
    weights: np.ndarray
    events: List[str]


def precondition_due(state: LayerOptState, cfg) -> bool:
    return state.name in PRECONDITIONED and state.step % cfg.update_interval == 0


def _quantized_curvature(curv: KroneckerCurvature, cfg) -> KroneckerCurvature:
    policy = cfg.precision
    return KroneckerCurvature(
        policy.store(curv.U, "curvature"), policy.store(curv.G, "curvature")
    )


def optimizer_step(
    state: LayerOptState,
    grad: np.ndarray,
    weights: np.ndarray,
    curv: Optional[KroneckerCurvature],
    cfg,
    lr_scale: float = 1.0,
) -> StepOutcome:
    """Advance one layer by one step

    A singular KFAC inversion keeps the previous inverses, is reported as an
    event and marks the state diverged; so do non-finite values anywhere in
    the new state or weights. Neither stops the step. A state that is
    already non-finite, or a non-finite curvature, skips the preconditioner
    refresh.

    Args:
        state: Layer state
        grad: d_o x d_i gradient of the mean batch loss
        weights: d_o x d_i weights
        curv: Curvature of this step (only read on refresh steps of the
            preconditioned optimizers)
        cfg: OptimizerConfig
        lr_scale: Schedule multiplier on beta2

    Returns:
        StepOutcome with the new state, new weights and event messages
    """
    policy = cfg.precision
    grad = policy.store(grad, "gradients")
    events: List[str] = []
    step = state.step

    if precondition_due(state, cfg):
        if curv is None:
            raise ContractError(f"{state.name} needs curvature on step {step}")
        curv = _quantized_curvature(curv, cfg)
        if not (state_is_finite(state) and is_finite(curv.U) and is_finite(curv.G)):
            logger.warning(f"Step {step}: non-finite {state.name} state or curvature, skipping preconditioner refresh")
            events.append(f"step {step}: preconditioner refresh skipped on non-finite values")
            state = state.copy_with(diverged=True)
        elif state.name == "kfac":
            accumulated = kfac_accumulate(state, curv, cfg)
            try:
                state = kfac_invert(accumulated, cfg)
            except SingularMatrixError as e:
                logger.warning(f"Step {step}: KFAC inversion failed, keeping previous inverse: {e}")
                events.append(f"step {step}: singular damped factor (pivot {e.pivot})")
                state = accumulated.copy_with(diverged=True)
        elif state.name == "ikfac":
            state = ikfac_precond_update(state, curv, cfg)
        else:
            state = singd_precond_update(state, curv, cfg)

    if state.name in PRECONDITIONED:
        state, weights = apply_direction(state, grad, weights, cfg, lr_scale)
    elif state.name == "adamw":
        state, weights = adamw_step(state, grad, weights, cfg, lr_scale)
    elif state.name == "sgd":
        state, weights = sgd_momentum_step(state, grad, weights, cfg, lr_scale)
    else:
        raise ContractError(f"Unknown optimizer '{state.name}'")

    state = state.copy_with(step=step + 1)
    if not state_is_finite(state) or not np.all(np.isfinite(weights)):
        if not state.diverged:
            logger.warning(f"Step {step}: non-finite values in {state.name} state or weights")
        events.append(f"step {step}: non-finite optimizer state or weights")
        state = state.copy_with(diverged=True)
    return StepOutcome(state, weights, events)
