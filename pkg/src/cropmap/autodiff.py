"""Reverse-mode automatic differentiation over dense float64 arrays.

Each operation builds a graph node holding its parents and a closure that
routes the upstream gradient to them; ``backward`` runs the closures once in
reverse topological order.  The primitive set is exactly what the sequence
classifiers need: elementwise arithmetic, matmul (with stacked batch dims),
shape ops, activations, softmax, dropout, layer norm, reductions, attention,
and the losses.

Everything is 64-bit; desk-scale sizes make speed a non-issue and gradient
checks need the headroom.
"""

from __future__ import annotations

import numpy as np

from .errors import InvalidTarget, NotScalar, ShapeMismatch


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum grad down to ``shape`` undoing numpy broadcasting."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False, _parents=(), _backward=None):
        self.data = np.asarray(data, dtype=np.float64)
        self.requires_grad = bool(requires_grad)
        self.grad = np.zeros_like(self.data) if requires_grad else None
        self._parents = _parents
        self._backward = _backward

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, grad={self.requires_grad})"

    def zero_grad(self):
        if self.grad is not None:
            self.grad[...] = 0.0

    # -- graph bookkeeping ------------------------------------------------

    def _accumulate(self, g: np.ndarray):
        # first contribution: copy (g may be a view into another grad buffer)
        if self.grad is None:
            self.grad = np.array(np.broadcast_to(g, self.data.shape))
        else:
            self.grad += g

    def backward(self):
        """Reverse accumulation from a scalar; fills .grad on every node that
        requires (or feeds) gradients."""
        if self.data.size != 1:
            raise NotScalar(f"backward needs a scalar, got shape {self.data.shape}")
        order: list[Tensor] = []
        seen = set()
        stack = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if id(p) not in seen:
                    stack.append((p, False))
        self._accumulate(np.ones_like(self.data))
        for node in reversed(order):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)

    # -- operators ---------------------------------------------------------

    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(_lift(other), self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(self, other)

    def __neg__(self):
        return mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, key):
        return getitem(self, key)


def _lift(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(np.asarray(x, dtype=np.float64))


def _node(data, parents, backward) -> Tensor:
    needs = any(p.requires_grad or p._parents for p in parents)
    return Tensor(data, _parents=tuple(parents) if needs else (), _backward=backward if needs else None)


# -- elementwise ------------------------------------------------------------


def add(a, b) -> Tensor:
    a, b = _lift(a), _lift(b)
    out_data = a.data + b.data

    def backward(g):
        a._accumulate(_unbroadcast(g, a.shape))
        b._accumulate(_unbroadcast(g, b.shape))

    return _node(out_data, (a, b), backward)


def sub(a, b) -> Tensor:
    a, b = _lift(a), _lift(b)
    out_data = a.data - b.data

    def backward(g):
        a._accumulate(_unbroadcast(g, a.shape))
        b._accumulate(_unbroadcast(-g, b.shape))

    return _node(out_data, (a, b), backward)


def mul(a, b) -> Tensor:
    a, b = _lift(a), _lift(b)
    out_data = a.data * b.data

    def backward(g):
        a._accumulate(_unbroadcast(g * b.data, a.shape))
        b._accumulate(_unbroadcast(g * a.data, b.shape))

    return _node(out_data, (a, b), backward)


def sigmoid(x) -> Tensor:
    x = _lift(x)
    s = 1.0 / (1.0 + np.exp(-x.data))

    def backward(g):
        x._accumulate(g * s * (1.0 - s))

    return _node(s, (x,), backward)


def tanh(x) -> Tensor:
    x = _lift(x)
    t = np.tanh(x.data)

    def backward(g):
        x._accumulate(g * (1.0 - t * t))

    return _node(t, (x,), backward)


def relu(x) -> Tensor:
    x = _lift(x)
    mask = x.data > 0

    def backward(g):
        x._accumulate(g * mask)

    return _node(x.data * mask, (x,), backward)


# -- shape ops ----------------------------------------------------------------


def matmul(a, b) -> Tensor:
    a, b = _lift(a), _lift(b)
    if a.ndim < 2 or b.ndim < 2:
        raise ShapeMismatch(f"matmul needs >= 2-D operands, got {a.shape} @ {b.shape}")
    if a.shape[-1] != b.shape[-2]:
        raise ShapeMismatch(f"matmul inner dims differ: {a.shape} @ {b.shape}")
    out_data = a.data @ b.data

    def backward(g):
        a._accumulate(_unbroadcast(g @ b.data.swapaxes(-1, -2), a.shape))
        b._accumulate(_unbroadcast(a.data.swapaxes(-1, -2) @ g, b.shape))

    return _node(out_data, (a, b), backward)


def transpose(x, axes) -> Tensor:
    x = _lift(x)
    axes = tuple(axes)
    inverse = tuple(np.argsort(axes))

    def backward(g):
        x._accumulate(g.transpose(inverse))

    return _node(x.data.transpose(axes), (x,), backward)


def reshape(x, shape) -> Tensor:
    x = _lift(x)
    original = x.shape

    def backward(g):
        x._accumulate(g.reshape(original))

    return _node(x.data.reshape(shape), (x,), backward)


def concat(tensors, axis: int = -1) -> Tensor:
    tensors = [_lift(t) for t in tensors]
    sizes = [t.shape[axis] for t in tensors]
    splits = np.cumsum(sizes)[:-1]

    def backward(g):
        for t, piece in zip(tensors, np.split(g, splits, axis=axis)):
            t._accumulate(piece)

    return _node(np.concatenate([t.data for t in tensors], axis=axis), tensors, backward)


def stack(tensors, axis: int = 0) -> Tensor:
    tensors = [_lift(t) for t in tensors]

    def backward(g):
        for i, t in enumerate(tensors):
            t._accumulate(np.take(g, i, axis=axis))

    return _node(np.stack([t.data for t in tensors], axis=axis), tensors, backward)


def getitem(x, key) -> Tensor:
    x = _lift(x)

    def backward(g):
        full = np.zeros_like(x.data)
        np.add.at(full, key, g)
        x._accumulate(full)

    return _node(x.data[key], (x,), backward)


# -- reductions ----------------------------------------------------------------


def tsum(x, axis=None, keepdims: bool = False) -> Tensor:
    x = _lift(x)

    def backward(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        x._accumulate(np.broadcast_to(g, x.shape).copy())

    return _node(x.data.sum(axis=axis, keepdims=keepdims), (x,), backward)


def tmean(x, axis=None, keepdims: bool = False) -> Tensor:
    x = _lift(x)
    if axis is None:
        count = x.data.size
    elif isinstance(axis, tuple):
        count = int(np.prod([x.data.shape[a] for a in axis]))
    else:
        count = x.data.shape[axis]

    def backward(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        x._accumulate(np.broadcast_to(g / count, x.shape).copy())

    return _node(x.data.mean(axis=axis, keepdims=keepdims), (x,), backward)


# -- neural-net pieces ---------------------------------------------------------


def softmax(x) -> Tensor:
    """Softmax over the last axis."""
    x = _lift(x)
    shifted = x.data - x.data.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    y = e / e.sum(axis=-1, keepdims=True)

    def backward(g):
        dot = (g * y).sum(axis=-1, keepdims=True)
        x._accumulate(y * (g - dot))

    return _node(y, (x,), backward)


def dropout(x, p: float, rng: np.random.Generator, train: bool) -> Tensor:
    """Inverted-scaling dropout; identity in eval mode."""
    x = _lift(x)
    if not train or p <= 0.0:
        return x
    keep = 1.0 - p
    mask = (rng.random(x.shape) < keep) / keep

    def backward(g):
        x._accumulate(g * mask)

    return _node(x.data * mask, (x,), backward)


def layer_norm(x, gain, bias, eps: float = 1e-5) -> Tensor:
    """Normalize the last axis to zero mean / unit variance, then scale-shift."""
    x, gain, bias = _lift(x), _lift(gain), _lift(bias)
    mu = x.data.mean(axis=-1, keepdims=True)
    centered = x.data - mu
    var = (centered * centered).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = centered * inv

    def backward(g):
        gain._accumulate(_unbroadcast(g * xhat, gain.shape))
        bias._accumulate(_unbroadcast(g, bias.shape))
        gx = g * gain.data
        x._accumulate(inv * (gx - gx.mean(axis=-1, keepdims=True) - xhat * (gx * xhat).mean(axis=-1, keepdims=True)))

    return _node(xhat * gain.data + bias.data, (x, gain, bias), backward)


def gradient_reversal(x, lam: float) -> Tensor:
    """Identity forward; backward multiplies the upstream gradient by -lam."""
    x = _lift(x)

    def backward(g):
        x._accumulate(-lam * g)

    return _node(x.data.copy(), (x,), backward)


def cross_entropy(logits, targets, class_weights=None) -> Tensor:
    """Mean negative log softmax probability of the target class.

    With class_weights (length n_classes) the per-sample terms are weighted
    and normalized by the summed weights of the batch.
    """
    logits = _lift(logits)
    targets = np.asarray(targets, dtype=np.int64)
    if logits.ndim != 2:
        raise ShapeMismatch(f"logits must be (batch, classes), got {logits.shape}")
    n, k = logits.shape
    if targets.shape != (n,):
        raise ShapeMismatch(f"targets shape {targets.shape} vs batch {n}")
    if targets.min(initial=0) < 0 or targets.max(initial=0) >= k:
        raise InvalidTarget(f"targets outside [0, {k})")
    shifted = logits.data - logits.data.max(axis=1, keepdims=True)
    logz = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    logp = shifted - logz
    rows = np.arange(n)
    if class_weights is None:
        w = np.ones(n)
    else:
        w = np.asarray(class_weights, dtype=np.float64)[targets]
    wsum = w.sum()
    loss = -(w * logp[rows, targets]).sum() / wsum

    def backward(g):
        p = np.exp(logp)
        grad = p * w[:, None]
        grad[rows, targets] -= w
        logits._accumulate(g * grad / wsum)

    return _node(np.asarray(loss), (logits,), backward)


def attention(q, k, v, n_heads: int, return_weights: bool = False):
    """Scaled dot-product attention with heads split from the channel axis.

    q, k, v: (batch, steps, d); d must divide by n_heads.  Returns
    (batch, steps, d), optionally with the (batch, heads, steps, steps)
    weight tensor.
    """
    q, k, v = _lift(q), _lift(k), _lift(v)
    b, t, d = q.shape
    if d % n_heads:
        raise ShapeMismatch(f"d={d} not divisible by {n_heads} heads")
    dh = d // n_heads

    def split(x):
        return transpose(reshape(x, (b, t, n_heads, dh)), (0, 2, 1, 3))

    qh, kh, vh = split(q), split(k), split(v)
    scores = mul(matmul(qh, transpose(kh, (0, 1, 3, 2))), 1.0 / np.sqrt(dh))
    weights = softmax(scores)
    ctx = matmul(weights, vh)
    out = reshape(transpose(ctx, (0, 2, 1, 3)), (b, t, d))
    if return_weights:
        return out, weights
    return out


# -- parameters and optimization ------------------------------------------------


def parameter(rng: np.random.Generator, shape, fan_in: int | None = None) -> Tensor:
    """Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) initialized trainable tensor."""
    if fan_in is None:
        fan_in = shape[0] if len(shape) > 1 else max(shape[0], 1)
    bound = 1.0 / np.sqrt(max(fan_in, 1))
    return Tensor(rng.uniform(-bound, bound, size=shape), requires_grad=True)


class Adam:
    """Standard Adam with bias correction over a named parameter dict."""

    def __init__(self, params: dict, lr: float = 5e-4, betas=(0.9, 0.999), eps: float = 1e-8):
        self.params = dict(params)
        self.lr = lr
        self.beta1, self.beta2 = betas
        self.eps = eps
        self.t = 0
        self.m = {k: np.zeros_like(p.data) for k, p in self.params.items()}
        self.v = {k: np.zeros_like(p.data) for k, p in self.params.items()}

    def zero_grad(self):
        for p in self.params.values():
            p.zero_grad()

    def step(self):
        self.t += 1
        b1t = 1.0 - self.beta1**self.t
        b2t = 1.0 - self.beta2**self.t
        for name, p in self.params.items():
            g = p.grad
            if g is None:
                continue
            m = self.m[name]
            v = self.v[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p.data -= self.lr * (m / b1t) / (np.sqrt(v / b2t) + self.eps)


class HalveOnPlateau:
    """Multiply lr by ``factor`` after ``patience`` epochs without a new best
    validation loss."""

    def __init__(self, optimizer: Adam, patience: int = 3, factor: float = 0.5):
        self.optimizer = optimizer
        self.patience = patience
        self.factor = factor
        self.best = np.inf
        self.stale = 0

    def step(self, val_loss: float):
        if val_loss < self.best - 1e-12:
            self.best = val_loss
            self.stale = 0
            return
        self.stale += 1
        if self.stale >= self.patience:
            self.optimizer.lr *= self.factor
            self.stale = 0
