"""Dense ReLU networks with hand-written backprop, Adam and MSE.

Inputs may be a single vector of shape ``(in,)`` or a batch ``(B, in)``.
Weights are stored as ``(in, out)`` matrices so a layer computes ``x @ W + b``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ContractError, NonFiniteError


class Mlp:
    def __init__(
        self,
        layer_sizes: Sequence[int],
        rng: np.random.Generator | None = None,
        final_scale: float | None = None,
    ):
        if len(layer_sizes) < 2:
            raise ContractError("an Mlp needs at least input and output sizes")
        self.layer_sizes = [int(s) for s in layer_sizes]
        rng = rng if rng is not None else np.random.default_rng(0)
        self.weights: list[np.ndarray] = []
        self.biases: list[np.ndarray] = []
        n_layers = len(self.layer_sizes) - 1
        for k, (fan_in, fan_out) in enumerate(zip(self.layer_sizes[:-1], self.layer_sizes[1:])):
            bound = 1.0 / np.sqrt(fan_in)
            if final_scale is not None and k == n_layers - 1:
                bound = final_scale
            self.weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
            self.biases.append(rng.uniform(-bound, bound, size=fan_out))

    @property
    def n_layers(self) -> int:
        return len(self.weights)

    @property
    def params(self) -> list[np.ndarray]:
        out = []
        for W, b in zip(self.weights, self.biases):
            out.extend((W, b))
        return out

    def set_params(self, params: Sequence[np.ndarray]) -> None:
        if len(params) != 2 * self.n_layers:
            raise ContractError(f"expected {2 * self.n_layers} parameter arrays, got {len(params)}")
        for k in range(self.n_layers):
            W, b = params[2 * k], params[2 * k + 1]
            if W.shape != self.weights[k].shape or b.shape != self.biases[k].shape:
                raise ContractError(f"layer {k}: shape mismatch {W.shape}/{b.shape}")
            self.weights[k] = np.array(W, dtype=np.float64)
            self.biases[k] = np.array(b, dtype=np.float64)

    def copy(self) -> "Mlp":
        net = Mlp.__new__(Mlp)
        net.layer_sizes = list(self.layer_sizes)
        net.weights = [W.copy() for W in self.weights]
        net.biases = [b.copy() for b in self.biases]
        return net

    def __call__(self, x):
        return forward(self, x)


@dataclass
class Gradients:
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    # d(output . upstream)/d(input), same shape as the input
    input: np.ndarray

    def as_list(self) -> list[np.ndarray]:
        out = []
        for W, b in zip(self.weights, self.biases):
            out.extend((W, b))
        return out


def _raise_non_finite(values: Sequence[np.ndarray], what: str) -> None:
    # NaN/inf survive ReLU and the mask multiply, so the first bad entry names the layer.
    for k, v in enumerate(values):
        if not np.isfinite(v).all():
            raise NonFiniteError(f"non-finite {what} at layer {k}")
    raise NonFiniteError(f"non-finite {what}")


def forward_cached(net: Mlp, x) -> tuple[np.ndarray, list[np.ndarray]]:
    """Forward pass keeping each layer's input for backprop."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != net.layer_sizes[0]:
        raise ContractError(f"input has size {x.shape[-1]}, network expects {net.layer_sizes[0]}")
    inputs = []
    h = x
    last = net.n_layers - 1
    for k, (W, b) in enumerate(zip(net.weights, net.biases)):
        inputs.append(h)
        z = h @ W
        z += b
        h = z if k == last else np.maximum(z, 0.0, out=z)
    if not np.isfinite(h).all():
        _raise_non_finite(inputs[1:] + [h], "activation")
    return h, inputs


def forward(net: Mlp, x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != net.layer_sizes[0]:
        raise ContractError(f"input has size {x.shape[-1]}, network expects {net.layer_sizes[0]}")
    h = x
    last = net.n_layers - 1
    for k, (W, b) in enumerate(zip(net.weights, net.biases)):
        z = h @ W
        z += b
        h = z if k == last else np.maximum(z, 0.0, out=z)
    if not np.isfinite(h).all():
        # Redo with the cache so the error names the first bad layer.
        forward_cached(net, x)
    return h


def backward(net: Mlp, x, upstream_grad, cache: list[np.ndarray] | None = None) -> Gradients:
    """Gradients of ``sum(output * upstream_grad)`` w.r.t. every parameter and the input.

    For a batch the parameter gradients are summed over rows.
    """
    if cache is None:
        _, cache = forward_cached(net, x)
    g = np.asarray(upstream_grad, dtype=np.float64)
    if g.shape[-1] != net.layer_sizes[-1]:
        raise ContractError(f"upstream gradient has size {g.shape[-1]}, output is {net.layer_sizes[-1]}")
    batched = g.ndim == 2
    dW = [None] * net.n_layers
    db = [None] * net.n_layers
    gs = [None] * net.n_layers
    for k in range(net.n_layers - 1, -1, -1):
        h_in = cache[k]
        if batched:
            dW[k] = h_in.T @ g
            db[k] = g.sum(axis=0)
        else:
            dW[k] = np.outer(h_in, g)
            db[k] = g.copy()
        g = g @ net.weights[k].T
        if k > 0:
            # h_in is the ReLU output of the previous layer; its derivative is (h_in > 0).
            g = g * (h_in > 0)
        gs[k] = g
    if not np.isfinite(g).all() or not all(np.isfinite(w).all() for w in dW):
        _raise_non_finite(gs, "gradient")
    return Gradients(weights=dW, biases=db, input=g)


def mse_loss(pred, target) -> tuple[float, np.ndarray]:
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise ContractError(f"shape mismatch: pred {pred.shape}, target {target.shape}")
    diff = pred - target
    n = diff.size
    return float(np.mean(diff**2)), 2.0 * diff / n


@dataclass
class AdamState:
    m: list[np.ndarray]
    v: list[np.ndarray]
    step_count: int = 0
    learning_rate: float = 3e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def zeros_like(cls, params: Sequence[np.ndarray], learning_rate: float = 3e-4, **kw) -> "AdamState":
        return cls(
            m=[np.zeros_like(p) for p in params],
            v=[np.zeros_like(p) for p in params],
            learning_rate=learning_rate,
            **kw,
        )

    def copy(self) -> "AdamState":
        return AdamState(
            m=[a.copy() for a in self.m],
            v=[a.copy() for a in self.v],
            step_count=self.step_count,
            learning_rate=self.learning_rate,
            beta1=self.beta1,
            beta2=self.beta2,
            eps=self.eps,
        )


def adam_step(
    params: Sequence[np.ndarray], grads: Sequence[np.ndarray], state: AdamState
) -> tuple[list[np.ndarray], AdamState]:
    """One bias-corrected Adam update; returns new parameters and a new state."""
    if len(params) != len(grads) or len(params) != len(state.m):
        raise ContractError("params, grads and optimizer state must have matching lengths")
    for i, g in enumerate(grads):
        if g.shape != params[i].shape:
            raise ContractError(f"gradient {i} has shape {g.shape}, parameter {params[i].shape}")
        if not np.isfinite(g).all():
            raise NonFiniteError(f"non-finite gradient for parameter {i}; update rejected")
    t = state.step_count + 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1**t
    c2 = 1.0 - b2**t
    new_params, new_m, new_v = [], [], []
    for p, g, m, v in zip(params, grads, state.m, state.v):
        m = b1 * m + (1.0 - b1) * g
        v = b2 * v + (1.0 - b2) * (g * g)
        new_params.append(p - state.learning_rate * (m / c1) / (np.sqrt(v / c2) + state.eps))
        new_m.append(m)
        new_v.append(v)
    new_state = AdamState(
        m=new_m, v=new_v, step_count=t, learning_rate=state.learning_rate,
        beta1=b1, beta2=b2, eps=state.eps,
    )
    return new_params, new_state


def flatten(params: Sequence[np.ndarray]) -> np.ndarray:
    return np.concatenate([np.ravel(p) for p in params]) if params else np.zeros(0)


def unflatten(flat: np.ndarray, like: Sequence[np.ndarray]) -> list[np.ndarray]:
    out, i = [], 0
    for p in like:
        out.append(np.asarray(flat[i:i + p.size], dtype=np.float64).reshape(p.shape))
        i += p.size
    if i != len(flat):
        raise ContractError(f"flat parameter vector has {len(flat)} entries, expected {i}")
    return out
