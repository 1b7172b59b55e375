"""Hand-rolled MLP on a flat parameter vector.

Layout contract: parameters are concatenated per layer as W (out, fan_in)
row-major followed by b (out,). Hidden layers apply tanh; the output layer
is linear. Gradients returned by backward() are summed over the batch.
All math follows the dtype of the parameter vector: float32 for training
speed, float64 where finite-difference precision matters.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

Sizes = tuple[int, ...]


def n_params(sizes: Sizes) -> int:
    return sum((i + 1) * o for i, o in zip(sizes[:-1], sizes[1:]))


def layer_slices(sizes: Sizes) -> list[tuple[slice, slice]]:
    """(weight_slice, bias_slice) per layer into the flat vector."""
    out = []
    pos = 0
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        w = slice(pos, pos + fan_in * fan_out)
        pos += fan_in * fan_out
        b = slice(pos, pos + fan_out)
        pos += fan_out
        out.append((w, b))
    return out


def init_params(sizes: Sizes, rng: np.random.Generator,
                dtype=np.float64) -> np.ndarray:
    """Fan-in uniform init, U(-1/sqrt(fan_in), 1/sqrt(fan_in)) for both
    weights and biases. Draw order: per layer, W then b."""
    params = np.empty(n_params(sizes), dtype=dtype)
    for (ws, bs), fan_in in zip(layer_slices(sizes), sizes[:-1]):
        bound = 1.0 / np.sqrt(fan_in)
        params[ws] = rng.uniform(-bound, bound, ws.stop - ws.start)
        params[bs] = rng.uniform(-bound, bound, bs.stop - bs.start)
    return params


def _weights(sizes: Sizes, params: np.ndarray):
    for (ws, bs), fan_in, fan_out in zip(layer_slices(sizes), sizes[:-1],
                                         sizes[1:]):
        yield params[ws].reshape(fan_out, fan_in), params[bs]


def forward(sizes: Sizes, params: np.ndarray, x: np.ndarray) -> np.ndarray:
    """x: (batch, in) or (in,). Returns (batch, out) or (out,)."""
    x = np.asarray(x)
    single = x.ndim == 1
    act = np.atleast_2d(x.astype(params.dtype, copy=False))
    layers = list(_weights(sizes, params))
    for li, (w, b) in enumerate(layers):
        act = act @ w.T + b
        if li < len(layers) - 1:
            act = np.tanh(act)
    return act[0] if single else act


def forward_cache(sizes: Sizes, params: np.ndarray, x: np.ndarray):
    """Forward pass keeping per-layer activations for backward().
    Returns (output (batch, out), cache)."""
    act = np.atleast_2d(np.asarray(x).astype(params.dtype, copy=False))
    layers = list(_weights(sizes, params))
    acts = [act]
    for li, (w, b) in enumerate(layers):
        act = act @ w.T + b
        if li < len(layers) - 1:
            act = np.tanh(act)
        acts.append(act)
    return acts[-1], acts


def backward(sizes: Sizes, params: np.ndarray, cache, dout: np.ndarray) -> np.ndarray:
    """dout: (batch, out) gradient of the loss w.r.t. the network output.
    Returns the flat parameter gradient, summed over the batch."""
    acts = cache
    layers = list(_weights(sizes, params))
    grad = np.zeros_like(params)
    slices = layer_slices(sizes)
    delta = np.atleast_2d(dout)
    for li in range(len(layers) - 1, -1, -1):
        w, _ = layers[li]
        ws, bs = slices[li]
        if li < len(layers) - 1:
            # acts[li + 1] is the tanh output of this layer
            delta = delta * (1.0 - acts[li + 1] ** 2)
        grad[ws] = (delta.T @ acts[li]).reshape(-1)
        grad[bs] = delta.sum(axis=0)
        if li > 0:
            delta = delta @ w
    return grad


def clip_grad_norm(grad: np.ndarray, max_norm: float) -> np.ndarray:
    norm = float(np.linalg.norm(grad))
    if norm > max_norm and norm > 0.0:
        return grad * (max_norm / norm)
    return grad


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    t: int = 0
    _scratch: np.ndarray | None = None

    @classmethod
    def zeros(cls, n: int, dtype=np.float64) -> "AdamState":
        return cls(m=np.zeros(n, dtype=dtype), v=np.zeros(n, dtype=dtype),
                   t=0)


def adam_step(params: np.ndarray, grad: np.ndarray, state: AdamState,
              lr: float, beta1: float = 0.9, beta2: float = 0.999,
              eps: float = 1e-8) -> None:
    """One Adam update, in place on params and state. Scratch space is
    reused across calls to avoid per-step allocations."""
    if state._scratch is None or state._scratch.shape != params.shape:
        state._scratch = np.empty_like(state.m)
    s = state._scratch
    state.t += 1
    state.m *= beta1
    np.multiply(grad, 1.0 - beta1, out=s)
    state.m += s
    state.v *= beta2
    np.multiply(grad, grad, out=s)
    s *= 1.0 - beta2
    state.v += s
    # s becomes sqrt(v_hat) + eps, then the full update
    np.divide(state.v, 1.0 - beta2 ** state.t, out=s)
    np.sqrt(s, out=s)
    s += eps
    np.divide(state.m, s, out=s)
    s *= lr / (1.0 - beta1 ** state.t)
    params -= s


def sgd_step(params: np.ndarray, grad: np.ndarray, lr: float) -> None:
    params -= lr * grad
