"""Differentiable building blocks with hand-written reverse-mode gradients.

No autodiff graph: the architecture is fixed (embedding table, stacked LSTM,
linear + ReLU, Huber loss, Adam), so each block exposes an explicit forward
that returns a cache and a backward that consumes it.  Everything runs on
float64 by default; float32 is available for speed and halves memory.

LSTM convention: gate order (input, forget, cell, output), single bias per
layer, hidden and cell state start at zero.  Batched sequences are padded to
a common length and masked, so a sample's hidden state freezes once its
sequence ends; an empty sequence yields the zero vector without touching any
weight.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "GradientError",
    "ParamTensor",
    "LstmLayer",
    "sigmoid",
    "embedding_lookup",
    "embedding_backward",
    "linear_forward",
    "linear_backward",
    "relu_forward",
    "relu_backward",
    "lstm_forward",
    "lstm_forward_cached",
    "lstm_backward_single",
    "lstm_batch_forward",
    "lstm_batch_backward",
    "huber_loss",
    "Adam",
]


class GradientError(FloatingPointError):
    """Non-finite gradient or loss."""


@dataclass
class ParamTensor:
    """A learnable array and its gradient accumulator."""

    values: np.ndarray
    grad: np.ndarray
    name: str = ""

    @classmethod
    def of(cls, values: np.ndarray, name: str = "") -> "ParamTensor":
        values = np.asarray(values)
        return cls(values, np.zeros_like(values), name)

    @property
    def size(self) -> int:
        return self.values.size

    def zero_grad(self) -> None:
        self.grad[...] = 0.0


def init_uniform(rng: np.random.Generator, shape, fan_in: int, dtype, name: str) -> ParamTensor:
    """Uniform in +-1/sqrt(fan_in), the usual scale-preserving init."""
    bound = 1.0 / np.sqrt(fan_in)
    vals = rng.uniform(-bound, bound, size=shape).astype(dtype)
    return ParamTensor.of(vals, name)


def sigmoid(x: np.ndarray) -> np.ndarray:
    with np.errstate(over="ignore"):
        return 1.0 / (1.0 + np.exp(-x))


# -- embedding ---------------------------------------------------------------

def embedding_lookup(table: ParamTensor, index: int) -> np.ndarray:
    if not 0 <= index < table.values.shape[0]:
        raise IndexError(f"embedding index {index} out of range 0..{table.values.shape[0] - 1}")
    return table.values[index].copy()


def embedding_backward(table: ParamTensor, index: int, grad_output: np.ndarray) -> None:
    if not 0 <= index < table.values.shape[0]:
        raise IndexError(f"embedding index {index} out of range")
    table.grad[index] += grad_output


# -- linear / relu -----------------------------------------------------------

def linear_forward(x: np.ndarray, w: ParamTensor, b: ParamTensor):
    """y = x W^T + b.  Accepts a single vector or a (batch, in) matrix."""
    if x.ndim == 1:
        return w.values @ x + b.values, x
    return x @ w.values.T + b.values, x


def linear_backward(cache_x: np.ndarray, w: ParamTensor, b: ParamTensor, dy: np.ndarray) -> np.ndarray:
    x = cache_x
    if x.ndim == 1:
        w.grad += np.outer(dy, x)
        b.grad += dy
        return w.values.T @ dy
    w.grad += dy.T @ x
    b.grad += dy.sum(axis=0)
    return dy @ w.values


def relu_forward(x: np.ndarray):
    y = np.maximum(x, 0.0)
    return y, x > 0.0


def relu_backward(mask: np.ndarray, dy: np.ndarray) -> np.ndarray:
    return dy * mask


# -- huber -------------------------------------------------------------------

def huber_loss(pred, target):
    """Elementwise Huber with delta 1: quadratic inside the unit error band,
    linear outside.  Returns (loss, dloss/dpred); the gradient saturates at
    +-1, which is the whole point."""
    e = np.asarray(pred, dtype=np.float64) - np.asarray(target, dtype=np.float64)
    ae = np.abs(e)
    loss = np.where(ae <= 1.0, 0.5 * e * e, ae - 0.5)
    grad = np.clip(e, -1.0, 1.0)
    return loss, grad


# -- lstm --------------------------------------------------------------------

@dataclass
class LstmLayer:
    """One LSTM layer: w_x (4h, d_in), w_h (4h, h), b (4h,)."""

    w_x: ParamTensor
    w_h: ParamTensor
    b: ParamTensor

    @property
    def hidden(self) -> int:
        return self.w_h.values.shape[1]

    @property
    def d_in(self) -> int:
        return self.w_x.values.shape[1]

    @classmethod
    def create(cls, rng: np.random.Generator, d_in: int, hidden: int, dtype, name: str) -> "LstmLayer":
        return cls(
            init_uniform(rng, (4 * hidden, d_in), d_in, dtype, f"{name}.w_x"),
            init_uniform(rng, (4 * hidden, hidden), hidden, dtype, f"{name}.w_h"),
            init_uniform(rng, (4 * hidden,), hidden, dtype, f"{name}.b"),
        )

    def parameters(self) -> list[ParamTensor]:
        return [self.w_x, self.w_h, self.b]


class _LayerCache:
    __slots__ = ("inp", "i", "f", "g", "o", "cc", "tc", "h_prev", "c_prev", "out")

    def __init__(self, T, B, h, d_in, dtype):
        self.inp = None                                # (T, B, d_in), set by caller
        self.i = np.empty((T, B, h), dtype=dtype)
        self.f = np.empty((T, B, h), dtype=dtype)
        self.g = np.empty((T, B, h), dtype=dtype)
        self.o = np.empty((T, B, h), dtype=dtype)
        self.cc = np.empty((T, B, h), dtype=dtype)     # candidate cell state
        self.tc = np.empty((T, B, h), dtype=dtype)     # tanh(candidate cell)
        self.h_prev = np.empty((T, B, h), dtype=dtype)
        self.c_prev = np.empty((T, B, h), dtype=dtype)
        self.out = None                                # (T, B, h) masked outputs


def lstm_batch_forward(X: np.ndarray, mask: np.ndarray, layers: list[LstmLayer], need_cache: bool = False):
    """Run stacked LSTM layers over a padded batch.

    X: (T, B, d_in); mask: (T, B, 1) with 1.0 while t is inside the sample's
    sequence.  Returns (h_last (B, h), caches).  With T == 0 the result is
    all zeros and the cache is empty.
    """
    T, B, _ = X.shape
    dtype = layers[0].w_x.values.dtype
    if T == 0:
        return np.zeros((B, layers[-1].hidden), dtype=dtype), []
    caches: list[_LayerCache] = []
    inp = X
    h_cur = None
    for layer in layers:
        h = layer.hidden
        xz = inp.reshape(T * B, -1) @ layer.w_x.values.T
        xz = xz.reshape(T, B, 4 * h) + layer.b.values
        cache = _LayerCache(T, B, h, layer.d_in, dtype) if need_cache else None
        out = np.empty((T, B, h), dtype=dtype)
        h_cur = np.zeros((B, h), dtype=dtype)
        c_cur = np.zeros((B, h), dtype=dtype)
        w_h_t = layer.w_h.values.T
        for t in range(T):
            z = xz[t] + h_cur @ w_h_t
            i = sigmoid(z[:, :h])
            f = sigmoid(z[:, h:2 * h])
            g = np.tanh(z[:, 2 * h:3 * h])
            o = sigmoid(z[:, 3 * h:])
            cc = f * c_cur + i * g
            tc = np.tanh(cc)
            hc = o * tc
            m = mask[t]
            if cache is not None:
                cache.i[t] = i
                cache.f[t] = f
                cache.g[t] = g
                cache.o[t] = o
                cache.cc[t] = cc
                cache.tc[t] = tc
                cache.h_prev[t] = h_cur
                cache.c_prev[t] = c_cur
            h_cur = m * hc + (1.0 - m) * h_cur
            c_cur = m * cc + (1.0 - m) * c_cur
            out[t] = h_cur
        if cache is not None:
            cache.inp = inp
            cache.out = out
            caches.append(cache)
        inp = out
    return h_cur, caches


def lstm_batch_backward(caches: list[_LayerCache], layers: list[LstmLayer],
                        mask: np.ndarray, dh_last: np.ndarray) -> np.ndarray:
    """Backprop through :func:`lstm_batch_forward`; accumulates parameter
    gradients and returns the gradient on the first layer's input sequence."""
    d_above = None  # gradient on the current layer's output sequence
    for li in range(len(layers) - 1, -1, -1):
        layer = layers[li]
        cache = caches[li]
        T, B, h = cache.i.shape
        dtype = cache.i.dtype
        DZ = np.empty((T, B, 4 * h), dtype=dtype)
        dh = dh_last.astype(dtype, copy=True) if li == len(layers) - 1 else np.zeros((B, h), dtype=dtype)
        dc = np.zeros((B, h), dtype=dtype)
        w_h = layer.w_h.values
        for t in range(T - 1, -1, -1):
            if d_above is not None:
                dh = dh + d_above[t]
            m = mask[t]
            keep = 1.0 - m
            dhc = m * dh
            dh_keep = keep * dh
            dcc = m * dc
            dc_keep = keep * dc
            i = cache.i[t]; f = cache.f[t]; g = cache.g[t]; o = cache.o[t]
            tc = cache.tc[t]; c_prev = cache.c_prev[t]
            do = dhc * tc
            dcc = dcc + dhc * o * (1.0 - tc * tc)
            di = dcc * g
            df = dcc * c_prev
            dg = dcc * i
            dc = dcc * f + dc_keep
            DZ[t, :, :h] = di * i * (1.0 - i)
            DZ[t, :, h:2 * h] = df * f * (1.0 - f)
            DZ[t, :, 2 * h:3 * h] = dg * (1.0 - g * g)
            DZ[t, :, 3 * h:] = do * o * (1.0 - o)
            dh = DZ[t] @ w_h + dh_keep
        DZf = DZ.reshape(T * B, 4 * h)
        layer.w_x.grad += DZf.T @ cache.inp.reshape(T * B, -1)
        layer.w_h.grad += DZf.T @ cache.h_prev.reshape(T * B, h)
        layer.b.grad += DZf.sum(axis=0)
        d_above = (DZf @ layer.w_x.values).reshape(T, B, -1)
    return d_above


def _as_seq_array(seq, d_in: int, dtype) -> np.ndarray:
    arr = np.asarray(seq, dtype=dtype)
    if arr.size == 0:
        return np.zeros((0, d_in), dtype=dtype)
    if arr.ndim != 2 or arr.shape[1] != d_in:
        raise ValueError(f"sequence must be (T, {d_in}), got {arr.shape}")
    return arr


def lstm_forward(seq, layers: list[LstmLayer]) -> np.ndarray:
    """Last hidden state of a single unpadded sequence; empty in, zeros out."""
    h, _ = lstm_forward_cached(seq, layers, need_cache=False)
    return h


def lstm_forward_cached(seq, layers: list[LstmLayer], need_cache: bool = True):
    dtype = layers[0].w_x.values.dtype
    arr = _as_seq_array(seq, layers[0].d_in, dtype)
    if arr.shape[0] == 0:
        return np.zeros(layers[-1].hidden, dtype=dtype), None
    X = arr[:, None, :]
    mask = np.ones((arr.shape[0], 1, 1), dtype=dtype)
    h, caches = lstm_batch_forward(X, mask, layers, need_cache=need_cache)
    return h[0], (caches, mask)


def lstm_backward_single(cache, layers: list[LstmLayer], dh: np.ndarray) -> np.ndarray:
    """Backward companion of :func:`lstm_forward_cached` for one sequence."""
    if cache is None:  # empty sequence: constant zero output, no gradients
        return np.zeros((0, layers[0].d_in), dtype=layers[0].w_x.values.dtype)
    caches, mask = cache
    dX = lstm_batch_backward(caches, layers, mask, dh[None, :])
    return dX[:, 0, :]


# -- adam --------------------------------------------------------------------

class Adam:
    """Adam with bias correction.  step() consumes and zeroes the gradients;
    a non-finite gradient is an error rather than a silent poisoning."""

    def __init__(self, params: list[ParamTensor], lr: float = 1e-3,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.params = list(params)
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self._m = [np.zeros_like(p.values) for p in self.params]
        self._v = [np.zeros_like(p.values) for p in self.params]

    def step(self) -> None:
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        bc1 = 1.0 - b1 ** self.t
        bc2 = 1.0 - b2 ** self.t
        for p, m, v in zip(self.params, self._m, self._v):
            g = p.grad
            if not np.all(np.isfinite(g)):
                raise GradientError(f"non-finite gradient in {p.name or 'parameter'}")
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * (g * g)
            p.values -= self.lr * (m / bc1) / (np.sqrt(v / bc2) + self.eps)
            p.grad[...] = 0.0
