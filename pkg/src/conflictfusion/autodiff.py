"""Minimal dense-tensor reverse-mode autodiff on numpy buffers.

Covers exactly the ops the fusion network needs: broadcast arithmetic,
2-D matmul, reshape/concat/sum reductions, GELU, layer norm, masked
softmax, dropout, and a numerically stable weighted BCE-with-logits.
float32 is the training dtype; building parameters as float64 switches
the whole graph to 64-bit for gradient checking.
"""

from __future__ import annotations

import math
from typing import Iterable, Sequence

import numpy as np

DEFAULT_DTYPE = np.float32

_GELU_C = math.sqrt(2.0 / math.pi)
_GELU_A = 0.044715


class Tensor:
    """A node in the computation graph: a numpy buffer plus backward closure."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad=False, dtype=None, _parents=(), _backward=None):
        arr = np.asarray(data)
        if dtype is not None:
            arr = arr.astype(dtype, copy=False)
        elif arr.dtype not in (np.float32, np.float64):
            arr = arr.astype(DEFAULT_DTYPE)
        self.data = arr
        self.grad = None
        self.requires_grad = bool(requires_grad)
        self._parents = _parents
        self._backward = _backward

    @property
    def shape(self):
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def size(self):
        return self.data.size

    def item(self) -> float:
        return self.data.item()

    def zero_grad(self):
        self.grad = None

    def accumulate_grad(self, g: np.ndarray):
        if self.grad is None:
            self.grad = g.astype(self.data.dtype, copy=True)
        else:
            self.grad += g

    def backward(self, grad=None):
        """Reverse-mode sweep from this node, accumulating into leaf .grad."""
        if grad is None:
            if self.data.size != 1:
                raise ValueError("backward() without an explicit gradient needs a scalar output")
            grad = np.ones_like(self.data)
        else:
            grad = np.asarray(grad, dtype=self.data.dtype)

        topo: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                topo.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for parent in node._parents:
                if parent.requires_grad and id(parent) not in seen:
                    stack.append((parent, False))

        grads: dict[int, np.ndarray] = {id(self): grad}
        for node in reversed(topo):
            g = grads.pop(id(node), None)
            if g is None:
                continue
            if node._backward is None:
                node.accumulate_grad(g)
                continue
            for parent, pg in node._backward(g):
                if not parent.requires_grad:
                    continue
                key = id(parent)
                if key in grads:
                    grads[key] = grads[key] + pg
                else:
                    grads[key] = pg

    # arithmetic sugar used throughout the network code
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def __repr__(self):
        return f"Tensor(shape={tuple(self.shape)}, dtype={self.data.dtype}, requires_grad={self.requires_grad})"


def as_tensor(x, dtype=None) -> Tensor:
    if isinstance(x, Tensor):
        return x
    return Tensor(x, dtype=dtype)


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum `grad` down to `shape` along the axes numpy broadcasting expanded."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


def _binary(a, b, fwd, da, db) -> Tensor:
    a = as_tensor(a)
    b = as_tensor(b, dtype=a.dtype if np.isscalar(b) else None)
    out_data = fwd(a.data, b.data)
    req = a.requires_grad or b.requires_grad

    def backward(g):
        out = []
        if a.requires_grad:
            out.append((a, _unbroadcast(da(g, a.data, b.data), a.data.shape)))
        if b.requires_grad:
            out.append((b, _unbroadcast(db(g, a.data, b.data), b.data.shape)))
        return out

    return Tensor(out_data, requires_grad=req, _parents=(a, b), _backward=backward if req else None)


def add(a, b) -> Tensor:
    return _binary(a, b, lambda x, y: x + y, lambda g, x, y: g, lambda g, x, y: g)


def sub(a, b) -> Tensor:
    return _binary(a, b, lambda x, y: x - y, lambda g, x, y: g, lambda g, x, y: -g)


def mul(a, b) -> Tensor:
    return _binary(a, b, lambda x, y: x * y, lambda g, x, y: g * y, lambda g, x, y: g * x)


def matmul(a, b) -> Tensor:
    a = as_tensor(a)
    b = as_tensor(b)
    if a.data.ndim != 2 or b.data.ndim != 2:
        raise ValueError(f"matmul expects 2-D operands, got {a.data.shape} @ {b.data.shape}")
    out_data = a.data @ b.data
    req = a.requires_grad or b.requires_grad

    def backward(g):
        out = []
        if a.requires_grad:
            out.append((a, g @ b.data.T))
        if b.requires_grad:
            out.append((b, a.data.T @ g))
        return out

    return Tensor(out_data, requires_grad=req, _parents=(a, b), _backward=backward if req else None)


def reshape(x, shape: Sequence[int]) -> Tensor:
    x = as_tensor(x)
    shape = tuple(shape)
    out_data = x.data.reshape(shape)

    def backward(g):
        return [(x, g.reshape(x.data.shape))]

    return Tensor(out_data, requires_grad=x.requires_grad, _parents=(x,),
                  _backward=backward if x.requires_grad else None)


def concat(tensors: Iterable[Tensor], axis: int = -1) -> Tensor:
    parts = [as_tensor(t) for t in tensors]
    out_data = np.concatenate([p.data for p in parts], axis=axis)
    req = any(p.requires_grad for p in parts)
    sizes = [p.data.shape[axis] for p in parts]
    offsets = np.cumsum([0] + sizes)

    def backward(g):
        out = []
        for p, lo, hi in zip(parts, offsets[:-1], offsets[1:]):
            if p.requires_grad:
                idx = [slice(None)] * g.ndim
                idx[axis] = slice(lo, hi)
                out.append((p, g[tuple(idx)]))
        return out

    return Tensor(out_data, requires_grad=req, _parents=tuple(parts), _backward=backward if req else None)


def tsum(x, axis=None, keepdims: bool = False) -> Tensor:
    x = as_tensor(x)
    out_data = x.data.sum(axis=axis, keepdims=keepdims)

    def backward(g):
        if axis is None:
            return [(x, np.broadcast_to(g, x.data.shape).copy())]
        if not keepdims:
            g = np.expand_dims(g, axis)
        return [(x, np.broadcast_to(g, x.data.shape).copy())]

    return Tensor(out_data, requires_grad=x.requires_grad, _parents=(x,),
                  _backward=backward if x.requires_grad else None)


def tmean(x, axis=None, keepdims: bool = False) -> Tensor:
    x = as_tensor(x)
    if axis is None:
        n = x.data.size
    else:
        n = x.data.shape[axis]
    return mul(tsum(x, axis=axis, keepdims=keepdims), 1.0 / n)


def tabs(x) -> Tensor:
    """Elementwise |x|; the subgradient at 0 is taken as 0."""
    x = as_tensor(x)
    out_data = np.abs(x.data)

    def backward(g):
        return [(x, g * np.sign(x.data))]

    return Tensor(out_data, requires_grad=x.requires_grad, _parents=(x,),
                  _backward=backward if x.requires_grad else None)


def pow_scalar(x, p: float) -> Tensor:
    x = as_tensor(x)
    out_data = x.data ** p

    def backward(g):
        return [(x, g * p * x.data ** (p - 1.0))]

    return Tensor(out_data, requires_grad=x.requires_grad, _parents=(x,),
                  _backward=backward if x.requires_grad else None)


def gelu(x) -> Tensor:
    """GELU, tanh approximation: 0.5*x*(1 + tanh(sqrt(2/pi)*(x + 0.044715*x^3)))."""
    x = as_tensor(x)
    v = x.data
    inner = _GELU_C * (v + _GELU_A * v ** 3)
    t = np.tanh(inner)
    out_data = 0.5 * v * (1.0 + t)

    def backward(g):
        sech2 = 1.0 - t * t
        d_inner = _GELU_C * (1.0 + 3.0 * _GELU_A * v ** 2)
        return [(x, g * (0.5 * (1.0 + t) + 0.5 * v * sech2 * d_inner))]

    return Tensor(out_data, requires_grad=x.requires_grad, _parents=(x,),
                  _backward=backward if x.requires_grad else None)


def layer_norm(x, gain, bias, eps: float = 1e-5) -> Tensor:
    """Standardise the last dimension, then apply a learnable affine map.

    Composed from primitives, so the gradient flows through mean and
    variance without a hand-derived fused backward.
    """
    x = as_tensor(x)
    gain = as_tensor(gain)
    bias = as_tensor(bias)
    d = x.data.shape[-1] if x.data.ndim else 0
    if d == 0:
        raise ValueError("layer_norm needs a non-empty last dimension")
    if gain.data.shape != (d,) or bias.data.shape != (d,):
        raise ValueError(f"gain/bias must have shape ({d},), got {gain.data.shape} and {bias.data.shape}")
    mu = tmean(x, axis=-1, keepdims=True)
    centered = sub(x, mu)
    var = tmean(mul(centered, centered), axis=-1, keepdims=True)
    inv = pow_scalar(add(var, eps), -0.5)
    return add(mul(mul(centered, inv), gain), bias)


def masked_softmax(logits, mask) -> Tensor:
    """Softmax over the last axis with invalid positions forced to exactly 0.

    `mask` is boolean, True = valid. Stabilised by max-subtraction over the
    valid entries; every row must contain at least one valid position.
    """
    logits = as_tensor(logits)
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != logits.data.shape:
        mask = np.broadcast_to(mask, logits.data.shape)
    if not mask.any(axis=-1).all():
        raise ValueError("masked_softmax: a row has every position masked")
    neg = np.where(mask, logits.data, -np.inf)
    m = neg.max(axis=-1, keepdims=True)
    e = np.exp(neg - m)
    out_data = e / e.sum(axis=-1, keepdims=True)

    def backward(g):
        dot = (g * out_data).sum(axis=-1, keepdims=True)
        return [(logits, out_data * (g - dot))]

    return Tensor(out_data, requires_grad=logits.requires_grad, _parents=(logits,),
                  _backward=backward if logits.requires_grad else None)


def dropout(x, p: float, rng: np.random.Generator, training: bool) -> Tensor:
    """Inverted dropout: scale kept units by 1/(1-p) at train time, identity at eval."""
    x = as_tensor(x)
    if not training or p == 0.0:
        return x
    if not 0.0 <= p < 1.0:
        raise ValueError(f"dropout rate must be in [0, 1), got {p}")
    keep = (rng.random(x.data.shape) >= p).astype(x.data.dtype) / (1.0 - p)
    return mul(x, Tensor(keep))


def _softplus(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0.0) + np.log1p(np.exp(-np.abs(x)))


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def stable_sigmoid(x):
    """Numerically stable sigmoid on plain arrays (inference-side helper)."""
    arr = np.asarray(x, dtype=np.float64)
    scalar = arr.ndim == 0
    out = _sigmoid(np.atleast_1d(arr))
    return float(out[0]) if scalar else out


def bce_with_logits(logits, targets, pos_weight: float = 1.0) -> Tensor:
    """Per-element weighted binary cross-entropy on logits.

    loss = pos_weight * t * softplus(-x) + (1 - t) * softplus(x), the
    log-sum-exp form of -[pw*t*log(sigmoid) + (1-t)*log(1-sigmoid)], so no
    log ever sees 0. Targets may be soft (label smoothing) and are constants.
    """
    logits = as_tensor(logits)
    t = np.asarray(targets, dtype=logits.data.dtype)
    if t.shape != logits.data.shape:
        t = np.broadcast_to(t, logits.data.shape)
    if t.min() < 0.0 or t.max() > 1.0:
        raise ValueError("bce_with_logits targets must lie in [0, 1]")
    if pos_weight <= 0.0:
        raise ValueError("pos_weight must be positive")
    x = logits.data
    out_data = pos_weight * t * _softplus(-x) + (1.0 - t) * _softplus(x)

    def backward(g):
        s = _sigmoid(x)
        return [(logits, g * (-pos_weight * t * (1.0 - s) + (1.0 - t) * s))]

    return Tensor(out_data, requires_grad=logits.requires_grad, _parents=(logits,),
                  _backward=backward if logits.requires_grad else None)


def linear(x, w, b) -> Tensor:
    """x @ w + b for a 2-D activation matrix."""
    return add(matmul(x, w), b)
