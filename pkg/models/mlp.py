"""
Fully-connected network with hand-written reverse mode.

Each layer is a weight matrix W_l of shape d_o x (d_i + 1); the last column
multiplies a constant-1 input coordinate and plays the role of the bias.
The backward pass exposes, per layer, the bias-augmented inputs u and the
per-example output gradients g that the Kronecker curvature is built from.
"""

import dataclasses
import logging
from typing import List, NamedTuple, Sequence, Tuple

import numpy as np

from utils.errors import ContractError, ShapeError

logger = logging.getLogger(__name__)

ACTIVATIONS = ("relu", "tanh", "identity")
LOSSES = ("softmax_cross_entropy", "mse")


@dataclasses.dataclass(frozen=True, eq=False)
class MLP:
    """Weights and per-layer activations; the last layer is usually identity"""

    weights: Tuple[np.ndarray, ...]
    activations: Tuple[str, ...]

    def __post_init__(self):
        if len(self.weights) != len(self.activations):
            raise ContractError("Every layer needs exactly one activation")
        for name in self.activations:
            if name not in ACTIVATIONS:
                raise ContractError(f"Unknown activation '{name}'")
        for prev, nxt in zip(self.weights[:-1], self.weights[1:]):
            if nxt.shape[1] != prev.shape[0] + 1:
                raise ShapeError(
                    f"Layer of shape {nxt.shape} cannot follow layer of shape {prev.shape}"
                )

    @property
    def layer_shapes(self) -> List[Tuple[int, int]]:
        return [w.shape for w in self.weights]

    def with_weights(self, weights: Sequence[np.ndarray]) -> "MLP":
        return MLP(tuple(weights), self.activations)


class LayerHooks(NamedTuple):
    """What one layer hands to the optimizer after a backward pass

    Attributes:
        grad: d_o x (d_i + 1) gradient of the mean batch loss
        inputs: m x (d_i + 1) bias-augmented layer inputs u
        out_grads: m x d_o gradients of each example's own loss with respect
            to that example's layer output
    """

    grad: np.ndarray
    inputs: np.ndarray
    out_grads: np.ndarray


class ForwardBackward(NamedTuple):
    loss: float
    layers: List[LayerHooks]
    nonfinite: bool


def init_mlp(
    dims: Sequence[int], hidden_activation: str = "tanh", seed: int = 0
) -> MLP:
    """Glorot-uniform weights with zero biases

    Args:
        dims: Layer widths, input first and output last
        hidden_activation: Activation of every hidden layer; the output layer
            is linear
        seed: Seed of the initializer

    Returns:
        The initialized MLP
    """
    if len(dims) < 2:
        raise ContractError("An MLP needs at least an input and an output width")
    rng = np.random.default_rng(seed)
    weights = []
    for d_in, d_out in zip(dims[:-1], dims[1:]):
        limit = np.sqrt(6.0 / (d_in + d_out))
        w = np.zeros((d_out, d_in + 1))
        w[:, :d_in] = rng.uniform(-limit, limit, size=(d_out, d_in))
        weights.append(w)
    activations = (hidden_activation,) * (len(weights) - 1) + ("identity",)
    return MLP(tuple(weights), activations)


def _augment(a: np.ndarray) -> np.ndarray:
    return np.concatenate([a, np.ones((a.shape[0], 1), dtype=a.dtype)], axis=1)


def _activate(z: np.ndarray, name: str) -> np.ndarray:
    if name == "relu":
        return np.maximum(z, 0.0)
    if name == "tanh":
        return np.tanh(z)
    return z


def _activation_grad(z: np.ndarray, a: np.ndarray, name: str) -> np.ndarray:
    if name == "relu":
        return (z > 0.0).astype(z.dtype)
    if name == "tanh":
        return 1.0 - a * a
    return np.ones_like(z)


def _forward(model: MLP, x: np.ndarray):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] + 1 != model.weights[0].shape[1]:
        raise ShapeError(
            f"Input batch of shape {x.shape} does not fit a first layer of "
            f"shape {model.weights[0].shape}"
        )
    inputs, pre, post = [], [], []
    a = x
    for w, name in zip(model.weights, model.activations):
        u = _augment(a)
        z = u @ w.T
        a = _activate(z, name)
        inputs.append(u)
        pre.append(z)
        post.append(a)
    return inputs, pre, post


def predict(model: MLP, x) -> np.ndarray:
    """Network outputs (logits for classification) for a batch"""
    return _forward(model, x)[2][-1]


def accuracy(model: MLP, x, labels) -> float:
    logits = predict(model, x)
    return float(np.mean(np.argmax(logits, axis=1) == np.asarray(labels)))


def _loss_and_output_grads(outputs: np.ndarray, targets, loss: str):
    """Per-example losses and their gradients with respect to the outputs"""
    if loss == "softmax_cross_entropy":
        labels = np.asarray(targets).astype(int).reshape(-1)
        if labels.shape[0] != outputs.shape[0]:
            raise ShapeError(
                f"{labels.shape[0]} labels for a batch of {outputs.shape[0]}"
            )
        if labels.size and (labels.min() < 0 or labels.max() >= outputs.shape[1]):
            raise ContractError(f"Labels must lie in [0, {outputs.shape[1]})")
        shifted = outputs - np.max(outputs, axis=1, keepdims=True)
        log_norm = np.log(np.sum(np.exp(shifted), axis=1, keepdims=True))
        log_probs = shifted - log_norm
        rows = np.arange(outputs.shape[0])
        per_example = -log_probs[rows, labels]
        grads = np.exp(log_probs)
        grads[rows, labels] -= 1.0
        return per_example, grads
    if loss == "mse":
        targets = np.asarray(targets, dtype=np.float64).reshape(outputs.shape[0], -1)
        if targets.shape != outputs.shape:
            raise ShapeError(f"Targets {targets.shape} do not match outputs {outputs.shape}")
        residual = outputs - targets
        return 0.5 * np.sum(residual * residual, axis=1), residual
    raise ContractError(f"Unknown loss '{loss}'")


def forward_backward(model: MLP, x, targets, loss: str = "softmax_cross_entropy") -> ForwardBackward:
    """Mean batch loss with per-layer gradients and curvature hooks

    Args:
        model: Network
        x: m x d batch of inputs
        targets: Integer labels (cross entropy) or m x d_out targets (MSE)
        loss: softmax_cross_entropy or mse (per example 1/2 ||z - y||^2)

    Returns:
        ForwardBackward with the loss, one LayerHooks per layer and a flag
        raised when any activation or gradient is non-finite
    """
    inputs, pre, post = _forward(model, x)
    batch = inputs[0].shape[0]
    if batch == 0:
        raise ContractError("forward_backward needs a nonempty batch")

    with np.errstate(over="ignore", invalid="ignore"):
        per_example, delta = _loss_and_output_grads(post[-1], targets, loss)
        # delta is d(per-example loss)/d(layer output) for each example
        hooks: List[LayerHooks] = [None] * len(model.weights)
        for index in reversed(range(len(model.weights))):
            delta = delta * _activation_grad(pre[index], post[index], model.activations[index])
            grad = delta.T @ inputs[index] / batch
            hooks[index] = LayerHooks(grad, inputs[index], delta)
            delta = delta @ model.weights[index][:, :-1]

    loss_value = float(np.mean(per_example))
    nonfinite = not np.isfinite(loss_value) or any(
        not np.all(np.isfinite(h.grad)) for h in hooks
    )
    if nonfinite:
        logger.warning("Non-finite values in forward/backward pass")
    return ForwardBackward(loss_value, hooks, nonfinite)
