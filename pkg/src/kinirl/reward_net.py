"""Five-layer fully convolutional cost network with hand-written gradients.

Layout: 5x5 (3->16), 3x3 (16->16), 3x3 (16->16), 3x3 (16->8), 3x3 (8->1),
rectifiers after the first four layers, linear output, zero "same" padding.
Everything is float64.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import ArgumentError, NumericError, StateError

#: (out_channels, in_channels, kernel) per layer
LAYERS = ((16, 3, 5), (16, 16, 3), (16, 16, 3), (8, 16, 3), (1, 8, 3))
N_FEATURES = LAYERS[0][1]


@dataclass(frozen=True, eq=False)
class FcnParams:
    weights: tuple
    biases: tuple
    # identity token so a forward cache can tell which parameter set made it
    token: object = field(default_factory=object, repr=False, compare=False)

    def arrays(self):
        return list(self.weights) + list(self.biases)

    @classmethod
    def from_arrays(cls, arrays):
        k = len(arrays) // 2
        return cls(tuple(arrays[:k]), tuple(arrays[k:]))

    def copy(self):
        return FcnParams.from_arrays([a.copy() for a in self.arrays()])


ParamGrads = FcnParams


def init_params(seed: int, layers=LAYERS) -> FcnParams:
    """He-uniform weights (limit sqrt(6 / fan_in)), zero biases."""
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for out_ch, in_ch, k in layers:
        limit = np.sqrt(6.0 / (in_ch * k * k))
        weights.append(rng.uniform(-limit, limit, size=(out_ch, in_ch, k, k)))
        biases.append(np.zeros(out_ch))
    return FcnParams(tuple(weights), tuple(biases))


def zero_params(layers=LAYERS) -> FcnParams:
    return FcnParams(tuple(np.zeros((o, i, k, k)) for o, i, k in layers),
                     tuple(np.zeros(o) for o, _, _ in layers))


def _windows(x, k):
    """(C, H, W) -> zero-padded sliding windows (C, H, W, k, k)."""
    p = k // 2
    xp = np.pad(x, ((0, 0), (p, p), (p, p)))
    return sliding_window_view(xp, (k, k), axis=(1, 2))


def _conv(x, weight, bias):
    out = np.tensordot(weight, _windows(x, weight.shape[-1]), axes=([1, 2, 3], [0, 3, 4]))
    out += bias[:, None, None]
    return out


@dataclass
class ForwardCache:
    token: object
    inputs: list  # input of each layer
    pre: list     # pre-activation of each layer


def fcn_forward(params: FcnParams, scene):
    """Cost map for a ``(3, H, W)`` feature stack plus the backward cache."""
    x = np.asarray(scene, dtype=np.float64)
    in_ch = params.weights[0].shape[1]
    if x.ndim != 3 or x.shape[0] != in_ch:
        raise ArgumentError(f"scene must have shape ({in_ch}, H, W), got {x.shape}")
    inputs, pre = [], []
    last = len(params.weights) - 1
    for layer, (wt, b) in enumerate(zip(params.weights, params.biases)):
        inputs.append(x)
        z = _conv(x, wt, b)
        pre.append(z)
        x = z if layer == last else np.maximum(z, 0.0)
    return x[0], ForwardCache(params.token, inputs, pre)


def fcn_backward(params: FcnParams, cache: ForwardCache, d_cost) -> ParamGrads:
    """Exact gradient of ``sum(d_cost * cost)`` with respect to every parameter."""
    if cache is None or cache.token is not params.token:
        raise StateError("forward cache does not belong to these parameters")
    d_cost = np.asarray(d_cost, dtype=np.float64)
    if d_cost.shape != cache.pre[-1].shape[1:]:
        raise StateError(f"gradient grid {d_cost.shape} does not match cached cost "
                         f"{cache.pre[-1].shape[1:]}")
    n_layers = len(params.weights)
    d_w = [None] * n_layers
    d_b = [None] * n_layers
    delta = d_cost[None]
    for layer in range(n_layers - 1, -1, -1):
        wt = params.weights[layer]
        k = wt.shape[-1]
        d_w[layer] = np.tensordot(delta, _windows(cache.inputs[layer], k), axes=([1, 2], [1, 2]))
        d_b[layer] = delta.sum(axis=(1, 2))
        if layer == 0:
            break
        # transposed correlation: correlate delta with the flipped kernel
        flipped = wt[:, :, ::-1, ::-1]
        d_in = np.tensordot(flipped, _windows(delta, k), axes=([0, 2, 3], [0, 3, 4]))
        delta = d_in * (cache.pre[layer - 1] > 0.0)
    return FcnParams(tuple(d_w), tuple(d_b))


@dataclass
class AdamState:
    lr: float = 1e-4
    decay: float = 0.99
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: list = None
    v: list = None


def adam_step(params: FcnParams, grads: ParamGrads, state: AdamState):
    """One bias-corrected Adam update; returns ``(new_params, state)``.

    The learning-rate decay is not applied here: the trainer multiplies
    ``state.lr`` by ``state.decay`` once per epoch.
    """
    p_arrays = params.arrays()
    g_arrays = grads.arrays()
    if len(p_arrays) != len(g_arrays) or any(p.shape != g.shape for p, g in zip(p_arrays, g_arrays)):
        raise ArgumentError("gradient shapes do not match parameter shapes")
    if not all(np.all(np.isfinite(g)) for g in g_arrays):
        raise NumericError("non-finite gradient; update refused")
    if state.m is None:
        state.m = [np.zeros_like(p) for p in p_arrays]
        state.v = [np.zeros_like(p) for p in p_arrays]
    state.step += 1
    bc1 = 1.0 - state.beta1 ** state.step
    bc2 = 1.0 - state.beta2 ** state.step
    out = []
    for p, g, m, v in zip(p_arrays, g_arrays, state.m, state.v):
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * (g * g)
        out.append(p - state.lr * (m / bc1) / (np.sqrt(v / bc2) + state.eps))
    return FcnParams.from_arrays(out), state
