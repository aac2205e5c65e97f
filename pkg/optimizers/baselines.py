"""
First-order baselines written in the same notation as the preconditioned
optimizers: beta1 is the second-moment rate, beta2 the step size, alpha2 the
momentum and lambda the denominator damping.
"""

import logging

import numpy as np

from optimizers.state import LayerOptState
from utils.errors import ShapeError

logger = logging.getLogger(__name__)


def _check(state: LayerOptState, grad: np.ndarray, weights: np.ndarray) -> None:
    if grad.shape != state.shape or weights.shape != state.shape:
        raise ShapeError(
            f"Gradient {grad.shape} and weights {weights.shape} must match "
            f"the layer shape {state.shape}"
        )


def adamw_step(state: LayerOptState, grad, weights, cfg, lr_scale: float = 1.0):
    """AdamW step at t = state.step + 1

    m_s <- (1 - beta1) m_s + beta1 g^2
    s <- sqrt(m_s / (1 - (1 - beta1)^t)) + lambda
    m_mu <- alpha2 m_mu + (1 - alpha2) g
    M = m_mu / (s (1 - alpha2^t))
    W <- W - beta2 M + gamma W          (adamw_decay_sign = "as_printed")
    W <- W - beta2 M - beta2 gamma W    (adamw_decay_sign = "decoupled")

    Returns:
        (new state, new weights)
    """
    grad, weights = np.asarray(grad), np.asarray(weights)
    _check(state, grad, weights)
    policy = cfg.precision
    grad, weights = policy.load(grad), policy.load(weights)
    m_s, m_mu = policy.load(state.second_moment), policy.load(state.m_mu)
    t = state.step + 1
    beta1, alpha2 = cfg.beta1, cfg.alpha2
    step_size = cfg.beta2 * lr_scale

    m_s = (1.0 - beta1) * m_s + beta1 * grad * grad
    s = np.sqrt(m_s / (1.0 - (1.0 - beta1) ** t)) + cfg.damping
    m_mu = alpha2 * m_mu + (1.0 - alpha2) * grad
    with np.errstate(divide="ignore", invalid="ignore"):
        direction = m_mu / (s * (1.0 - alpha2**t))
    # zero gradient with zero damping gives 0/0 where the update is 0
    direction = np.where(m_mu == 0.0, 0.0, direction)

    if cfg.adamw_decay_sign == "decoupled":
        new_weights = weights - step_size * direction - step_size * cfg.weight_decay * weights
    else:
        new_weights = weights - step_size * direction + cfg.weight_decay * weights

    new_state = state.copy_with(
        second_moment=policy.store(m_s, "factor_state"),
        m_mu=policy.store(m_mu, "factor_state"),
    )
    return new_state, policy.store(new_weights, "parameters")


def sgd_momentum_step(state: LayerOptState, grad, weights, cfg, lr_scale: float = 1.0):
    """m <- alpha2 m + g + gamma W, then W <- W - beta2 m"""
    grad, weights = np.asarray(grad), np.asarray(weights)
    _check(state, grad, weights)
    policy = cfg.precision
    grad, weights = policy.load(grad), policy.load(weights)
    m_mu = cfg.alpha2 * policy.load(state.m_mu) + grad + cfg.weight_decay * weights
    new_weights = weights - (cfg.beta2 * lr_scale) * m_mu
    return (
        state.copy_with(m_mu=policy.store(m_mu, "factor_state")),
        policy.store(new_weights, "parameters"),
    )
