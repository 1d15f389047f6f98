"""Small fully-connected networks in plain numpy (float64).

The actor maps an observation to action logits and the critic to a scalar
value.  Forward passes cache layer activations so the backward passes can
produce exact analytic gradients; nothing here is stochastic or
approximate, which is what makes the finite-difference checks in the test
suite meaningful.

Parameter flattening order is fixed and documented: actor layers first,
then critic layers, each layer contributing its weight matrix (row-major)
followed by its bias vector.  Aggregation, checkpointing and similarity
analysis all rely on this order.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

_ACTIVATIONS = ("tanh", "relu")


@dataclass
class MLPParams:
    """Weights of one feed-forward network.

    ``weights[i]`` has shape (fan_in, fan_out); the output layer is linear.
    """

    weights: list[np.ndarray]
    biases: list[np.ndarray]
    activation: str = "tanh"

    def dims(self) -> tuple[int, ...]:
        return tuple([self.weights[0].shape[0]] + [w.shape[1] for w in self.weights])

    def copy(self) -> "MLPParams":
        return MLPParams(
            weights=[w.copy() for w in self.weights],
            biases=[b.copy() for b in self.biases],
            activation=self.activation,
        )


@dataclass
class ModelParams:
    """Actor/critic parameter pair for one agent."""

    actor: MLPParams
    critic: MLPParams

    def copy(self) -> "ModelParams":
        return ModelParams(actor=self.actor.copy(), critic=self.critic.copy())

    @property
    def obs_dim(self) -> int:
        return self.actor.dims()[0]

    @property
    def n_actions(self) -> int:
        return self.actor.dims()[-1]

    @property
    def hidden(self) -> tuple[int, ...]:
        return self.actor.dims()[1:-1]

    @property
    def activation(self) -> str:
        return self.actor.activation


def _init_mlp(dims: Sequence[int], activation: str, rng: np.random.Generator) -> MLPParams:
    if activation not in _ACTIVATIONS:
        raise ValueError(f"activation must be one of {_ACTIVATIONS}, got {activation!r}")
    weights = []
    biases = []
    for fan_in, fan_out in zip(dims, dims[1:]):
        weights.append(rng.normal(0.0, 1.0 / np.sqrt(fan_in), size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out, dtype=np.float64))
    return MLPParams(weights=weights, biases=biases, activation=activation)


def init_model(
    obs_dim: int,
    hidden: Sequence[int],
    n_actions: int,
    activation: str = "tanh",
    seed: int | np.random.SeedSequence = 0,
) -> ModelParams:
    """Seeded initialisation: weights ~ N(0, 1/fan_in), zero biases."""
    rng = np.random.default_rng(seed)
    dims = [obs_dim, *hidden]
    return ModelParams(
        actor=_init_mlp(dims + [n_actions], activation, rng),
        critic=_init_mlp(dims + [1], activation, rng),
    )


def _act(x: np.ndarray, kind: str) -> np.ndarray:
    if kind == "tanh":
        return np.tanh(x)
    return np.maximum(x, 0.0)


def _act_grad(post: np.ndarray, pre: np.ndarray, kind: str) -> np.ndarray:
    if kind == "tanh":
        return 1.0 - post * post
    return (pre > 0.0).astype(np.float64)


def mlp_forward(params: MLPParams, x: np.ndarray) -> tuple[np.ndarray, list]:
    """Batched forward pass.

    ``x`` is (batch, fan_in); returns (output, cache) where the cache holds
    per-layer inputs and pre-activations for the backward pass.
    """
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    cache = []
    h = x
    last = len(params.weights) - 1
    for i, (w, b) in enumerate(zip(params.weights, params.biases)):
        pre = h @ w + b
        post = pre if i == last else _act(pre, params.activation)
        cache.append((h, pre, post))
        h = post
    return h, cache


def mlp_backward(params: MLPParams, cache: list, dout: np.ndarray) -> tuple[list[np.ndarray], list[np.ndarray]]:
    """Exact gradients of ``sum(dout * output)`` w.r.t. weights and biases."""
    dout = np.atleast_2d(np.asarray(dout, dtype=np.float64))
    grads_w: list[np.ndarray] = [np.empty(0)] * len(params.weights)
    grads_b: list[np.ndarray] = [np.empty(0)] * len(params.biases)
    delta = dout
    last = len(params.weights) - 1
    for i in range(last, -1, -1):
        h, pre, post = cache[i]
        if i != last:
            delta = delta * _act_grad(post, pre, params.activation)
        grads_w[i] = h.T @ delta
        grads_b[i] = delta.sum(axis=0)
        if i > 0:
            delta = delta @ params.weights[i].T
    return grads_w, grads_b


def softmax(logits: np.ndarray) -> np.ndarray:
    """Row-wise stable softmax."""
    z = np.atleast_2d(np.asarray(logits, dtype=np.float64))
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def _flatten_mlp(p: MLPParams) -> np.ndarray:
    parts = []
    for w, b in zip(p.weights, p.biases):
        parts.append(w.ravel())
        parts.append(b.ravel())
    return np.concatenate(parts) if parts else np.empty(0)


def flatten_params(params: ModelParams) -> np.ndarray:
    """Concatenated float64 vector: actor layers then critic layers."""
    return np.concatenate([_flatten_mlp(params.actor), _flatten_mlp(params.critic)])


def count_params(params: ModelParams) -> int:
    return int(flatten_params(params).size)


def _unflatten_mlp(template: MLPParams, vec: np.ndarray, offset: int) -> tuple[MLPParams, int]:
    weights = []
    biases = []
    for w, b in zip(template.weights, template.biases):
        weights.append(vec[offset : offset + w.size].reshape(w.shape).copy())
        offset += w.size
        biases.append(vec[offset : offset + b.size].reshape(b.shape).copy())
        offset += b.size
    return MLPParams(weights=weights, biases=biases, activation=template.activation), offset


def unflatten_params(template: ModelParams, vec: np.ndarray) -> ModelParams:
    """Inverse of :func:`flatten_params` for networks shaped like ``template``."""
    vec = np.asarray(vec, dtype=np.float64).ravel()
    expected = count_params(template)
    if vec.size != expected:
        raise ValueError(f"expected {expected} parameters, got {vec.size}")
    actor, offset = _unflatten_mlp(template.actor, vec, 0)
    critic, offset = _unflatten_mlp(template.critic, vec, offset)
    return ModelParams(actor=actor, critic=critic)
