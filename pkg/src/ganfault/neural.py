"""Small fully-connected networks with hand-written backpropagation.

Layer ``i`` computes ``y_i = act_i(y_{i-1} @ W_i + b_i)`` on row batches,
i.e. ``W_i`` is stored ``(fan_in, fan_out)``.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from .exceptions import DomainError

ACTIVATIONS = ("tanh", "sigmoid", "identity", "relu")


@dataclass
class Layer:
    W: np.ndarray
    b: np.ndarray
    activation: str

    def __post_init__(self):
        if self.activation not in ACTIVATIONS:
            raise DomainError(f"unknown activation {self.activation!r}")
        if self.W.ndim != 2 or self.b.shape != (self.W.shape[1],):
            raise DomainError("layer weight/bias shapes do not match")


@dataclass
class MlpParams:
    layers: list

    def __post_init__(self):
        for a, b in zip(self.layers, self.layers[1:]):
            if a.W.shape[1] != b.W.shape[0]:
                raise DomainError("consecutive layer sizes do not chain")

    @property
    def sizes(self):
        return [self.layers[0].W.shape[0]] + [L.W.shape[1] for L in self.layers]

    @property
    def n_in(self):
        return self.layers[0].W.shape[0]

    @property
    def n_out(self):
        return self.layers[-1].W.shape[1]

    def arrays(self):
        """Parameter arrays in a fixed order (W0, b0, W1, b1, ...). Views, not copies."""
        out = []
        for L in self.layers:
            out += [L.W, L.b]
        return out

    def copy(self):
        return MlpParams([Layer(L.W.copy(), L.b.copy(), L.activation) for L in self.layers])


@dataclass
class ForwardCache:
    inputs: list  # input to each layer
    outputs: list  # activated output of each layer
    pre: list = field(default_factory=list)


def init_mlp(sizes, activations, rng):
    """Xavier-uniform weights, zero biases."""
    if len(activations) != len(sizes) - 1:
        raise DomainError("need one activation per layer")
    layers = []
    for fan_in, fan_out, act in zip(sizes[:-1], sizes[1:], activations):
        lim = np.sqrt(6.0 / (fan_in + fan_out))
        layers.append(Layer(rng.uniform(-lim, lim, (fan_in, fan_out)), np.zeros(fan_out), act))
    return MlpParams(layers)


def _act(name, a):
    if name == "tanh":
        return np.tanh(a)
    if name == "sigmoid":
        return expit(a)
    if name == "relu":
        return np.maximum(a, 0.0)
    return a


def _act_grad(name, pre, out):
    if name == "tanh":
        return 1.0 - out * out
    if name == "sigmoid":
        return out * (1.0 - out)
    if name == "relu":
        return (pre > 0).astype(float)
    return np.ones_like(out)


def mlp_forward(params, x):
    """Forward pass on a vector or a row batch; returns ``(output, cache)``."""
    X = np.asarray(x, dtype=float)
    single = X.ndim == 1
    X2 = X[None, :] if single else X
    if X2.ndim != 2 or X2.shape[1] != params.n_in:
        raise DomainError(f"expected input of size {params.n_in}, got shape {X.shape}")
    cache = ForwardCache([], [], [])
    h = X2
    for L in params.layers:
        cache.inputs.append(h)
        a = h @ L.W + L.b
        h = _act(L.activation, a)
        cache.pre.append(a)
        cache.outputs.append(h)
    return (h[0] if single else h), cache


def mlp_backward(params, cache, grad_out):
    """Gradients of ``sum(grad_out * output)`` w.r.t. parameters and input.

    Returns ``(grads, grad_in)`` where ``grads`` follows
    :meth:`MlpParams.arrays` order.
    """
    if len(cache.inputs) != len(params.layers):
        raise DomainError("cache does not belong to these parameters")
    g = np.asarray(grad_out, dtype=float)
    single = g.ndim == 1
    if single:
        g = g[None, :]
    if g.shape != cache.outputs[-1].shape:
        raise DomainError(f"output gradient shape {g.shape} != {cache.outputs[-1].shape}")
    grads = [None] * (2 * len(params.layers))
    for i in range(len(params.layers) - 1, -1, -1):
        L = params.layers[i]
        delta = g * _act_grad(L.activation, cache.pre[i], cache.outputs[i])
        grads[2 * i] = cache.inputs[i].T @ delta
        grads[2 * i + 1] = delta.sum(axis=0)
        g = delta @ L.W.T
    return grads, (g[0] if single else g)


@dataclass
class AdamState:
    m: list
    v: list
    t: int = 0

    @classmethod
    def zeros_like(cls, arrays):
        return cls([np.zeros_like(a) for a in arrays], [np.zeros_like(a) for a in arrays])


def adam_step(arrays, grads, state, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8, ascent=False):
    """In-place Adam update of ``arrays``; returns the advanced state.

    ``ascent=True`` climbs the objective instead of descending.
    """
    if len(arrays) != len(grads):
        raise DomainError("parameter and gradient lists differ in length")
    t = state.t + 1
    sign = 1.0 if ascent else -1.0
    c1 = 1.0 - beta1**t
    c2 = 1.0 - beta2**t
    for p, g, m, v in zip(arrays, grads, state.m, state.v):
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * g * g
        p += sign * lr * (m / c1) / (np.sqrt(v / c2) + eps)
    state.t = t
    return state


def recon_loss(x, x_rec, mode="raw"):
    """Squared reconstruction error of one vector.

    ``mode="normalized"`` divides by the dimension and caps at 1.
    """
    x = np.asarray(x, dtype=float)
    x_rec = np.asarray(x_rec, dtype=float)
    if x.shape != x_rec.shape:
        raise DomainError(f"length mismatch {x.shape} vs {x_rec.shape}")
    raw = float(np.sum((x - x_rec) ** 2))
    if mode == "raw":
        return raw
    if mode == "normalized":
        return min(raw / x.size, 1.0)
    raise DomainError(f"unknown loss mode {mode!r}")


def recon_aggregate(X, X_rec):
    """Average reconstruction error scaled by ``1 / (m sqrt(d))``."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    X_rec = np.atleast_2d(np.asarray(X_rec, dtype=float))
    if X.shape != X_rec.shape:
        raise DomainError(f"shape mismatch {X.shape} vs {X_rec.shape}")
    m, d = X.shape
    return float(np.sum((X - X_rec) ** 2) / (m * np.sqrt(d)))
