"""Dense tensor algebra with reverse-mode gradients, losses, and AdamW.

Everything runs in float64. Each forward pass records a tape of backward
closures on the output tensors; calling :func:`backward` on a scalar loss
propagates gradients to every ``requires_grad`` ancestor and the tape is
dropped with the tensors afterwards.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp


class ShapeMismatchError(ValueError):
    pass


class NumericalError(RuntimeError):
    pass


class Tensor:
    """A float64 array with an optional gradient slot and backward rule."""

    __slots__ = ("data", "requires_grad", "grad", "_backward", "_prev")

    def __init__(self, data, requires_grad=False):
        self.data = np.asarray(data, dtype=np.float64)
        self.requires_grad = bool(requires_grad)
        self.grad = None
        self._backward = None
        self._prev = ()

    @property
    def shape(self):
        return self.data.shape

    def zero_grad(self):
        self.grad = None

    def detach(self):
        return Tensor(self.data.copy())

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"


def _as_tensor(x):
    return x if isinstance(x, Tensor) else Tensor(x)


def _accum(t, g):
    if not (t.requires_grad or t._prev):
        return
    if t.grad is None:
        t.grad = np.zeros_like(t.data)
    t.grad += g


def _make(data, parents, backward):
    out = Tensor(data)
    if any(p.requires_grad or p._prev for p in parents):
        out._prev = tuple(parents)
        out._backward = backward
    return out


def add(a, b):
    """Elementwise sum with numpy broadcasting (used for bias addition)."""
    a, b = _as_tensor(a), _as_tensor(b)
    data = a.data + b.data

    def backward(out):
        g = out.grad
        _accum(a, _unbroadcast(g, a.data.shape))
        _accum(b, _unbroadcast(g, b.data.shape))

    return _make(data, (a, b), backward)


def sub(a, b):
    a, b = _as_tensor(a), _as_tensor(b)
    data = a.data - b.data

    def backward(out):
        g = out.grad
        _accum(a, _unbroadcast(g, a.data.shape))
        _accum(b, -_unbroadcast(g, b.data.shape))

    return _make(data, (a, b), backward)


def mul(a, b):
    a, b = _as_tensor(a), _as_tensor(b)
    data = a.data * b.data

    def backward(out):
        g = out.grad
        _accum(a, _unbroadcast(g * b.data, a.data.shape))
        _accum(b, _unbroadcast(g * a.data, b.data.shape))

    return _make(data, (a, b), backward)


def scale(a, c):
    a = _as_tensor(a)
    c = float(c)
    data = a.data * c

    def backward(out):
        _accum(a, out.grad * c)

    return _make(data, (a,), backward)


def _unbroadcast(g, shape):
    """Reduce gradient ``g`` back to ``shape`` after numpy broadcasting."""
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for ax, n in enumerate(shape):
        if n == 1 and g.shape[ax] != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g


def matmul(a, b):
    a, b = _as_tensor(a), _as_tensor(b)
    if a.data.shape[-1] != b.data.shape[0]:
        raise ShapeMismatchError(
            f"matmul: inner dimensions differ, {a.data.shape} vs {b.data.shape}"
        )
    data = a.data @ b.data

    def backward(out):
        g = out.grad
        _accum(a, g @ b.data.T)
        _accum(b, a.data.T @ g)

    return _make(data, (a, b), backward)


def spmm(s, h):
    """Product of a constant sparse matrix with a tensor: s @ h."""
    h = _as_tensor(h)
    if s.shape[1] != h.data.shape[0]:
        raise ShapeMismatchError(
            f"spmm: inner dimensions differ, {s.shape} vs {h.data.shape}"
        )
    st = s.T.tocsr()
    data = np.asarray(s @ h.data)

    def backward(out):
        _accum(h, np.asarray(st @ out.grad))

    return _make(data, (h,), backward)


def transpose(a):
    a = _as_tensor(a)

    def backward(out):
        _accum(a, out.grad.T)

    return _make(a.data.T, (a,), backward)


def reshape(a, shape):
    a = _as_tensor(a)

    def backward(out):
        _accum(a, out.grad.reshape(a.data.shape))

    return _make(a.data.reshape(shape), (a,), backward)


def concat(tensors, axis=1):
    tensors = [_as_tensor(t) for t in tensors]
    data = np.concatenate([t.data for t in tensors], axis=axis)
    sizes = [t.data.shape[axis] for t in tensors]

    def backward(out):
        pieces = np.split(out.grad, np.cumsum(sizes)[:-1], axis=axis)
        for t, g in zip(tensors, pieces):
            _accum(t, g)

    return _make(data, tuple(tensors), backward)


def affine(x, w, b):
    """x @ w + b with b broadcast over rows."""
    x, w, b = _as_tensor(x), _as_tensor(w), _as_tensor(b)
    if x.data.shape[-1] != w.data.shape[0]:
        raise ShapeMismatchError(
            f"affine: input width {x.data.shape} does not match weight {w.data.shape}"
        )
    return add(matmul(x, w), b)


def leaky_relu(x, neg_slope=0.01):
    x = _as_tensor(x)
    data = np.where(x.data >= 0.0, x.data, neg_slope * x.data)

    def backward(out):
        _accum(x, out.grad * np.where(x.data > 0.0, 1.0, neg_slope))

    return _make(data, (x,), backward)


def mean_all(x):
    x = _as_tensor(x)
    n = x.data.size

    def backward(out):
        _accum(x, np.full_like(x.data, out.grad / n))

    return _make(np.float64(x.data.mean()), (x,), backward)


def mse_loss(x, target):
    x = _as_tensor(x)
    target = _as_tensor(target)
    if x.data.shape != target.data.shape:
        raise ShapeMismatchError(
            f"mse_loss: shapes differ, {x.data.shape} vs {target.data.shape}"
        )
    return mean_all(mul(sub(x, target), sub(x, target)))


def softmax(logits):
    """Row-wise softmax of a plain array, stabilized by max subtraction."""
    z = np.asarray(logits, dtype=np.float64)
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def softmax_cross_entropy(logits, labels):
    """Mean negative log softmax probability of the true labels."""
    logits = _as_tensor(logits)
    labels = np.asarray(labels, dtype=np.int64)
    n, c = logits.data.shape
    if labels.shape != (n,):
        raise ShapeMismatchError(
            f"softmax_cross_entropy: {labels.shape} labels for {n} rows"
        )
    if labels.min() < 0 or labels.max() >= c:
        raise ValueError(f"label out of range [0, {c}): {labels}")
    shifted = logits.data - logits.data.max(axis=1, keepdims=True)
    logsumexp = np.log(np.exp(shifted).sum(axis=1))
    nll = logsumexp - shifted[np.arange(n), labels]
    probs = softmax(logits.data)

    def backward(out):
        g = probs.copy()
        g[np.arange(n), labels] -= 1.0
        _accum(logits, out.grad * g / n)

    return _make(np.float64(nll.mean()), (logits,), backward)


def backward(loss):
    """Reverse-mode sweep from a scalar loss over its recorded tape."""
    if np.ndim(loss.data) != 0:
        raise ValueError(f"backward requires a scalar loss, got shape {loss.data.shape}")
    order = []
    seen = set()
    stack = [(loss, False)]
    while stack:
        node, done = stack.pop()
        if done:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._prev:
            if id(p) not in seen:
                stack.append((p, False))
    loss.grad = np.ones_like(loss.data)
    for node in reversed(order):
        if node._backward is not None and node.grad is not None:
            node._backward(node)


@dataclass
class LrSchedule:
    """Step decay: base_lr scaled by decay_factor every decay_every epochs."""

    base_lr: float = 0.001
    decay_factor: float = 0.1
    decay_every: int = 20

    def lr(self, epoch):
        return self.base_lr * self.decay_factor ** (epoch // self.decay_every)


@dataclass
class AdamWHyper:
    lr: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 0.001


@dataclass
class OptimizerState:
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)
    step_count: int = 0


class AdamW:
    """Adam with decoupled weight decay over a named parameter dict."""

    def __init__(self, params, hyper=None):
        self.params = dict(params)
        self.hyper = hyper if hyper is not None else AdamWHyper()
        self.state = OptimizerState()
        for name, p in self.params.items():
            self.state.m[name] = np.zeros_like(p.data)
            self.state.v[name] = np.zeros_like(p.data)

    def zero_grad(self):
        for p in self.params.values():
            p.zero_grad()

    def step(self):
        h = self.hyper
        self.state.step_count += 1
        t = self.state.step_count
        for name, p in self.params.items():
            g = p.grad
            if g is None:
                continue
            if not np.all(np.isfinite(g)):
                raise NumericalError(f"non-finite gradient for parameter '{name}'")
            m = self.state.m[name]
            v = self.state.v[name]
            m *= h.beta1
            m += (1.0 - h.beta1) * g
            v *= h.beta2
            v += (1.0 - h.beta2) * g * g
            m_hat = m / (1.0 - h.beta1**t)
            v_hat = v / (1.0 - h.beta2**t)
            p.data -= h.lr * m_hat / (np.sqrt(v_hat) + h.eps)
            p.data -= h.lr * h.weight_decay * p.data


def glorot_uniform(rng, fan_in, fan_out, shape=None):
    """Uniform init in +/- sqrt(6 / (fan_in + fan_out))."""
    if shape is None:
        shape = (fan_in, fan_out)
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


def parameter(rng, fan_in, fan_out, shape=None):
    return Tensor(glorot_uniform(rng, fan_in, fan_out, shape), requires_grad=True)
