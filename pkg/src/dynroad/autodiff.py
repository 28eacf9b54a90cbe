"""Minimal dense-tensor reverse-mode autodiff engine.

All training losses in this package are built from the ops below. Values are
64-bit numpy arrays in row-major layout. The graph is rebuilt per training
step (define-by-run): each op records its inputs and a local gradient
closure on the output tensor, and ``backward`` replays the closures in
reverse creation order, which is a valid topological order by construction.

Broadcasting is deliberately restricted: elementwise ops require identical
shapes, ``add``/``sub`` additionally accept a 1-d bias on the last axis, and
anything else goes through the explicit ``broadcast_to`` / ``scale`` ops.
"""

from __future__ import annotations

import itertools

import numpy as np

_creation_counter = itertools.count()


class ShapeMismatch(ValueError):
    """Raised when operand shapes do not conform for an op."""

    def __init__(self, op, *shapes):
        self.op = op
        self.shapes = tuple(shapes)
        super().__init__(f"{op}: incompatible shapes {' vs '.join(map(str, shapes))}")


class Tensor:
    """Dense float64 value node in a differentiation graph.

    ``grad`` stays ``None`` until ``backward`` reaches this tensor (or
    allocates zeros for a registered leaf). Data is treated as immutable
    once the tensor participates in a forward graph; optimizers mutate
    leaf data in place only after the graph has been consumed.
    """

    __slots__ = ("data", "requires_grad", "grad", "_parents", "_backward", "_order")

    def __init__(self, data, requires_grad=False):
        arr = np.asarray(data, dtype=np.float64)
        self.data = arr
        self.requires_grad = bool(requires_grad)
        self.grad = None
        self._parents = ()
        self._backward = None
        self._order = next(_creation_counter)

    @property
    def shape(self):
        return self.data.shape

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"

    def _accumulate(self, g):
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += g

    def zero_grad(self):
        self.grad = None

    def backward(self, leaves=None):
        backward(self, leaves=leaves)

    # light sugar; the module-level functions are the primary API
    def __add__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __mul__(self, other):
        return mul(self, other)

    def __matmul__(self, other):
        return matmul(self, other)

    def __neg__(self):
        return scale(self, -1.0)


def _wrap(x):
    return x if isinstance(x, Tensor) else Tensor(x)


def _result(data, parents, backward_fn):
    out = Tensor(data)
    out.requires_grad = any(p.requires_grad for p in parents)
    if out.requires_grad:
        out._parents = tuple(parents)
        out._backward = backward_fn
    return out


def backward(loss, leaves=None):
    """Populate ``grad`` for every requires_grad tensor reachable from loss.

    ``loss`` must be scalar (shape () or (1,)). Optional ``leaves`` get zero
    grads allocated even when unreachable, so optimizers see an explicit
    zero rather than a missing gradient.
    """
    if loss.data.size != 1:
        raise ValueError(f"backward: loss must be scalar, got shape {loss.data.shape}")
    # gather the reachable subgraph, then replay in reverse creation order
    nodes = {}
    stack = [loss]
    while stack:
        t = stack.pop()
        if id(t) in nodes:
            continue
        nodes[id(t)] = t
        stack.extend(t._parents)
    loss._accumulate(np.ones_like(loss.data))
    for t in sorted(nodes.values(), key=lambda t: t._order, reverse=True):
        if t._backward is not None and t.grad is not None:
            t._backward(t.grad)
    if leaves is not None:
        for p in leaves:
            if p.requires_grad and p.grad is None:
                p.grad = np.zeros_like(p.data)


# ---------------------------------------------------------------------------
# elementwise and structural ops


def add(a, b):
    a, b = _wrap(a), _wrap(b)
    if a.data.shape != b.data.shape:
        # bias-add on the last axis is the one allowed broadcast
        if b.data.ndim != 1 or a.data.shape[-1:] != b.data.shape:
            raise ShapeMismatch("add", a.data.shape, b.data.shape)

    def back(g):
        if a.requires_grad:
            a._accumulate(g)
        if b.requires_grad:
            if b.data.shape == g.shape:
                b._accumulate(g)
            else:
                b._accumulate(g.reshape(-1, b.data.shape[0]).sum(axis=0))

    return _result(a.data + b.data, (a, b), back)


def sub(a, b):
    a, b = _wrap(a), _wrap(b)
    if a.data.shape != b.data.shape:
        if b.data.ndim != 1 or a.data.shape[-1:] != b.data.shape:
            raise ShapeMismatch("sub", a.data.shape, b.data.shape)

    def back(g):
        if a.requires_grad:
            a._accumulate(g)
        if b.requires_grad:
            if b.data.shape == g.shape:
                b._accumulate(-g)
            else:
                b._accumulate(-g.reshape(-1, b.data.shape[0]).sum(axis=0))

    return _result(a.data - b.data, (a, b), back)


def mul(a, b):
    a, b = _wrap(a), _wrap(b)
    if a.data.shape != b.data.shape:
        raise ShapeMismatch("mul", a.data.shape, b.data.shape)

    def back(g):
        if a.requires_grad:
            a._accumulate(g * b.data)
        if b.requires_grad:
            b._accumulate(g * a.data)

    return _result(a.data * b.data, (a, b), back)


def scale(a, c):
    """Multiply by a python scalar (broadcast scalar x tensor)."""
    a = _wrap(a)
    c = float(c)

    def back(g):
        if a.requires_grad:
            a._accumulate(g * c)

    return _result(a.data * c, (a,), back)


def matmul(a, b):
    a, b = _wrap(a), _wrap(b)
    ad, bd = a.data, b.data
    if ad.ndim < 2 or bd.ndim < 2 or ad.shape[-1] != bd.shape[-2]:
        raise ShapeMismatch("matmul", ad.shape, bd.shape)
    if ad.ndim == 3 and bd.ndim == 3 and ad.shape[0] != bd.shape[0]:
        raise ShapeMismatch("matmul", ad.shape, bd.shape)
    if ad.ndim > 3 or bd.ndim > 3 or (ad.ndim == 2 and bd.ndim == 3):
        raise ShapeMismatch("matmul", ad.shape, bd.shape)

    def back(g):
        if a.requires_grad:
            a._accumulate(g @ bd.swapaxes(-1, -2))
        if b.requires_grad:
            if ad.ndim == bd.ndim:
                b._accumulate(ad.swapaxes(-1, -2) @ g)
            else:
                # stacked input against a shared 2-d weight
                k, m = bd.shape
                b._accumulate(ad.reshape(-1, k).T @ g.reshape(-1, m))

    return _result(ad @ bd, (a, b), back)


def concat(tensors, axis=-1):
    tensors = [_wrap(t) for t in tensors]
    if not tensors:
        raise ValueError("concat: need at least one tensor")
    if axis != -1:
        raise ShapeMismatch("concat", axis)
    widths = [t.data.shape[-1] for t in tensors]
    lead = tensors[0].data.shape[:-1]
    for t in tensors[1:]:
        if t.data.shape[:-1] != lead:
            raise ShapeMismatch("concat", tensors[0].data.shape, t.data.shape)

    def back(g):
        off = 0
        for t, w in zip(tensors, widths):
            if t.requires_grad:
                t._accumulate(g[..., off:off + w])
            off += w

    return _result(np.concatenate([t.data for t in tensors], axis=-1), tensors, back)


def tslice(a, key):
    """Basic slicing (tuple of slices/ints); gradient scatters back."""
    a = _wrap(a)
    data = a.data[key]

    def back(g):
        if a.requires_grad:
            full = np.zeros_like(a.data)
            full[key] = g
            a._accumulate(full)

    return _result(np.ascontiguousarray(data), (a,), back)


def reshape(a, shape):
    a = _wrap(a)

    def back(g):
        if a.requires_grad:
            a._accumulate(g.reshape(a.data.shape))

    return _result(a.data.reshape(shape), (a,), back)


def swap_last2(a):
    """Transpose the last two axes (for Q Kᵀ attention scores)."""
    a = _wrap(a)

    def back(g):
        if a.requires_grad:
            a._accumulate(g.swapaxes(-1, -2))

    return _result(np.ascontiguousarray(a.data.swapaxes(-1, -2)), (a,), back)


def broadcast_to(a, shape):
    """Explicit broadcast; gradient sums over the expanded axes."""
    a = _wrap(a)
    shape = tuple(shape)
    try:
        data = np.broadcast_to(a.data, shape)
    except ValueError:
        raise ShapeMismatch("broadcast_to", a.data.shape, shape) from None

    def back(g):
        if not a.requires_grad:
            return
        src = a.data.shape
        extra = len(shape) - len(src)
        if extra:
            g = g.sum(axis=tuple(range(extra)))
        axes = tuple(i for i, n in enumerate(src) if n == 1 and g.shape[i] != 1)
        if axes:
            g = g.sum(axis=axes, keepdims=True)
        a._accumulate(g)

    return _result(np.ascontiguousarray(data), (a,), back)


def tsum(a, axis=None):
    """Sum over all elements (axis=None → scalar) or over the last axis."""
    a = _wrap(a)
    if axis is None:
        def back(g):
            if a.requires_grad:
                a._accumulate(np.full_like(a.data, float(g)))

        return _result(a.data.sum(), (a,), back)
    if axis not in (-1, a.data.ndim - 1):
        raise ShapeMismatch("sum", axis)

    def back(g):
        if a.requires_grad:
            a._accumulate(np.repeat(g[..., None], a.data.shape[-1], axis=-1))

    return _result(a.data.sum(axis=-1), (a,), back)


def tmean(a):
    a = _wrap(a)
    n = a.data.size

    def back(g):
        if a.requires_grad:
            a._accumulate(np.full_like(a.data, float(g) / n))

    return _result(a.data.mean(), (a,), back)


# ---------------------------------------------------------------------------
# nonlinearities


def relu(a):
    a = _wrap(a)

    def back(g):
        if a.requires_grad:
            a._accumulate(g * (a.data > 0))

    return _result(np.maximum(a.data, 0.0), (a,), back)


def sigmoid(a):
    a = _wrap(a)
    # stable logistic: exp of a non-positive argument on both branches
    y = np.where(a.data >= 0, 1.0 / (1.0 + np.exp(-np.abs(a.data))),
                 np.exp(-np.abs(a.data)) / (1.0 + np.exp(-np.abs(a.data))))

    def back(g):
        if a.requires_grad:
            a._accumulate(g * y * (1.0 - y))

    return _result(y, (a,), back)


def tanh(a):
    a = _wrap(a)
    y = np.tanh(a.data)

    def back(g):
        if a.requires_grad:
            a._accumulate(g * (1.0 - y * y))

    return _result(y, (a,), back)


def exp(a):
    a = _wrap(a)
    y = np.exp(a.data)

    def back(g):
        if a.requires_grad:
            a._accumulate(g * y)

    return _result(y, (a,), back)


def log(a):
    a = _wrap(a)

    def back(g):
        if a.requires_grad:
            a._accumulate(g / a.data)

    return _result(np.log(a.data), (a,), back)


def cos(a):
    a = _wrap(a)

    def back(g):
        if a.requires_grad:
            a._accumulate(-g * np.sin(a.data))

    return _result(np.cos(a.data), (a,), back)


def sin(a):
    a = _wrap(a)

    def back(g):
        if a.requires_grad:
            a._accumulate(g * np.cos(a.data))

    return _result(np.sin(a.data), (a,), back)


def clip(a, lo, hi):
    """Clamp values; gradient passes only through the interior."""
    a = _wrap(a)
    y = np.clip(a.data, lo, hi)

    def back(g):
        if a.requires_grad:
            a._accumulate(g * ((a.data > lo) & (a.data < hi)))

    return _result(y, (a,), back)


def softmax(a):
    """Softmax over the last axis, computed with max subtraction."""
    a = _wrap(a)
    shifted = a.data - a.data.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    y = e / e.sum(axis=-1, keepdims=True)

    def back(g):
        if a.requires_grad:
            a._accumulate(y * (g - (g * y).sum(axis=-1, keepdims=True)))

    return _result(y, (a,), back)


def layer_norm(a, gain, bias, eps=1e-5):
    """Layer normalization over the last axis with learnable scale/shift."""
    a, gain, bias = _wrap(a), _wrap(gain), _wrap(bias)
    d = a.data.shape[-1]
    if gain.data.shape != (d,) or bias.data.shape != (d,):
        raise ShapeMismatch("layer_norm", a.data.shape, gain.data.shape, bias.data.shape)
    mu = a.data.mean(axis=-1, keepdims=True)
    xc = a.data - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = xc * inv
    y = gain.data * xhat + bias.data

    def back(g):
        if gain.requires_grad:
            gain._accumulate((g * xhat).reshape(-1, d).sum(axis=0))
        if bias.requires_grad:
            bias._accumulate(g.reshape(-1, d).sum(axis=0))
        if a.requires_grad:
            gx = g * gain.data
            a._accumulate(inv * (gx - gx.mean(axis=-1, keepdims=True)
                                 - xhat * (gx * xhat).mean(axis=-1, keepdims=True)))

    return _result(y, (a, gain, bias), back)


def embedding_lookup(table, indices):
    """Gather rows of a 2-d table; indices may be any integer array."""
    table = _wrap(table)
    idx = np.asarray(indices, dtype=np.int64)
    if table.data.ndim != 2:
        raise ShapeMismatch("embedding_lookup", table.data.shape)
    if idx.size and (idx.min() < 0 or idx.max() >= table.data.shape[0]):
        raise IndexError(
            f"embedding_lookup: index out of range for table with "
            f"{table.data.shape[0]} rows")

    def back(g):
        if table.requires_grad:
            if table.grad is None:
                table.grad = np.zeros_like(table.data)
            np.add.at(table.grad, idx.ravel(),
                      g.reshape(-1, table.data.shape[1]))

    return _result(table.data[idx], (table,), back)


def take_per_row(a, indices):
    """out[i] = a[i, indices[i]] for a 2-d tensor (per-row gather)."""
    a = _wrap(a)
    idx = np.asarray(indices, dtype=np.int64)
    if a.data.ndim != 2 or idx.shape != (a.data.shape[0],):
        raise ShapeMismatch("take_per_row", a.data.shape, idx.shape)
    rows = np.arange(a.data.shape[0])

    def back(g):
        if a.requires_grad:
            if a.grad is None:
                a.grad = np.zeros_like(a.data)
            np.add.at(a.grad, (rows, idx), g)

    return _result(a.data[rows, idx], (a,), back)


def dropout(a, rate, rng):
    """Inverted dropout; rate 0 is the identity (no graph node added)."""
    a = _wrap(a)
    if rate <= 0.0:
        return a
    keep = (rng.random(a.data.shape) >= rate) / (1.0 - rate)

    def back(g):
        if a.requires_grad:
            a._accumulate(g * keep)

    return _result(a.data * keep, (a,), back)


# ---------------------------------------------------------------------------
# optimizers


def sgd_step(params, lr):
    """In-place SGD update; every parameter must carry a gradient."""
    for p in params:
        if p.grad is None:
            raise ValueError("sgd_step: parameter has no gradient")
    for p in params:
        p.data -= lr * p.grad
        p.grad = None


class Adam:
    """Adam with bias correction; moment state is held per parameter."""

    def __init__(self, params, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = list(params)
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.m = [np.zeros_like(p.data) for p in self.params]
        self.v = [np.zeros_like(p.data) for p in self.params]
        self.t = 0

    def step(self):
        for p in self.params:
            if p.grad is None:
                raise ValueError("adam_step: parameter has no gradient")
        self.t += 1
        b1c = 1.0 - self.beta1 ** self.t
        b2c = 1.0 - self.beta2 ** self.t
        for i, p in enumerate(self.params):
            g = p.grad
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * (g * g)
            p.data -= self.lr * (self.m[i] / b1c) / (np.sqrt(self.v[i] / b2c) + self.eps)
            p.grad = None


def adam_step(opt):
    """Apply one Adam update through a prepared optimizer."""
    opt.step()
