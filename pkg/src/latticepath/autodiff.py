"""Small reverse-mode automatic differentiation engine over numpy arrays.

Tensors record their parents and a backward closure; calling backward() on a
scalar walks the graph in reverse topological order and accumulates gradients
into every tensor created with requires_grad=True. Ops are vectorized and
broadcast-aware, float64 throughout.
"""

from __future__ import annotations

import math
from contextlib import contextmanager

import numpy as np

_grad_enabled = True


@contextmanager
def no_grad():
    """Disable graph recording inside the block (inference paths)."""
    global _grad_enabled
    prev = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = prev


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum grad down to `shape`, undoing numpy broadcasting."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self._parents: tuple[Tensor, ...] = ()
        self._backward = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        return float(self.data)

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def zero_grad(self) -> None:
        self.grad = None

    def _accumulate(self, g: np.ndarray) -> None:
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += g

    def backward(self) -> None:
        """Reverse-mode sweep from a scalar output."""
        if self.data.size != 1:
            raise ValueError("backward() requires a scalar tensor")
        topo: list[Tensor] = []
        visited: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, processed = stack.pop()
            if processed:
                topo.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if id(p) not in visited:
                    stack.append((p, False))
        self._accumulate(np.ones_like(self.data))
        for node in reversed(topo):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)

    def __repr__(self) -> str:
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"

    # arithmetic ------------------------------------------------------------

    def __add__(self, other):
        other = as_tensor(other)
        out = _make(self.data + other.data, (self, other))
        if out._parents:
            def backward(g):
                if self.requires_grad:
                    self._accumulate(_unbroadcast(g, self.data.shape))
                if other.requires_grad:
                    other._accumulate(_unbroadcast(g, other.data.shape))
            out._backward = backward
        return out

    __radd__ = __add__

    def __mul__(self, other):
        other = as_tensor(other)
        out = _make(self.data * other.data, (self, other))
        if out._parents:
            def backward(g):
                if self.requires_grad:
                    self._accumulate(_unbroadcast(g * other.data, self.data.shape))
                if other.requires_grad:
                    other._accumulate(_unbroadcast(g * self.data, other.data.shape))
            out._backward = backward
        return out

    __rmul__ = __mul__

    def __neg__(self):
        return self * -1.0

    def __sub__(self, other):
        return self + (-as_tensor(other))

    def __rsub__(self, other):
        return as_tensor(other) + (-self)

    def __truediv__(self, other):
        other = as_tensor(other)
        out = _make(self.data / other.data, (self, other))
        if out._parents:
            def backward(g):
                if self.requires_grad:
                    self._accumulate(_unbroadcast(g / other.data, self.data.shape))
                if other.requires_grad:
                    other._accumulate(_unbroadcast(-g * self.data / (other.data ** 2), other.data.shape))
            out._backward = backward
        return out

    def __rtruediv__(self, other):
        return as_tensor(other) / self

    def __pow__(self, exponent: float):
        out = _make(self.data ** exponent, (self,))
        if out._parents:
            def backward(g):
                self._accumulate(g * exponent * self.data ** (exponent - 1))
            out._backward = backward
        return out

    def __matmul__(self, other):
        other = as_tensor(other)
        out = _make(self.data @ other.data, (self, other))
        if out._parents:
            def backward(g):
                if self.requires_grad:
                    ga = g @ np.swapaxes(other.data, -1, -2)
                    self._accumulate(_unbroadcast(ga, self.data.shape))
                if other.requires_grad:
                    gb = np.swapaxes(self.data, -1, -2) @ g
                    other._accumulate(_unbroadcast(gb, other.data.shape))
            out._backward = backward
        return out

    # elementwise functions --------------------------------------------------

    def exp(self):
        out = _make(np.exp(self.data), (self,))
        if out._parents:
            data = out.data
            def backward(g):
                self._accumulate(g * data)
            out._backward = backward
        return out

    def log(self):
        out = _make(np.log(self.data), (self,))
        if out._parents:
            def backward(g):
                self._accumulate(g / self.data)
            out._backward = backward
        return out

    def tanh(self):
        out = _make(np.tanh(self.data), (self,))
        if out._parents:
            data = out.data
            def backward(g):
                self._accumulate(g * (1.0 - data ** 2))
            out._backward = backward
        return out

    def abs(self):
        out = _make(np.abs(self.data), (self,))
        if out._parents:
            def backward(g):
                self._accumulate(g * np.sign(self.data))
            out._backward = backward
        return out

    def gelu(self):
        """Gaussian error linear unit, tanh approximation (smooth everywhere)."""
        c = math.sqrt(2.0 / math.pi)
        a = 0.044715
        x = self.data
        u = c * (x + a * x ** 3)
        t = np.tanh(u)
        out = _make(0.5 * x * (1.0 + t), (self,))
        if out._parents:
            def backward(g):
                du = c * (1.0 + 3.0 * a * x ** 2)
                self._accumulate(g * (0.5 * (1.0 + t) + 0.5 * x * (1.0 - t ** 2) * du))
            out._backward = backward
        return out

    # shape ops ---------------------------------------------------------------

    def reshape(self, *shape):
        out = _make(self.data.reshape(*shape), (self,))
        if out._parents:
            def backward(g):
                self._accumulate(g.reshape(self.data.shape))
            out._backward = backward
        return out

    def transpose(self, axes: tuple[int, ...]):
        out = _make(self.data.transpose(axes), (self,))
        if out._parents:
            inverse = tuple(np.argsort(axes))
            def backward(g):
                self._accumulate(g.transpose(inverse))
            out._backward = backward
        return out

    def __getitem__(self, index):
        out = _make(self.data[index], (self,))
        if out._parents:
            def backward(g):
                full = np.zeros_like(self.data)
                np.add.at(full, index, g)
                self._accumulate(full)
            out._backward = backward
        return out

    # reductions ----------------------------------------------------------------

    def sum(self, axis=None, keepdims: bool = False):
        out = _make(self.data.sum(axis=axis, keepdims=keepdims), (self,))
        if out._parents:
            def backward(g):
                if axis is None:
                    self._accumulate(np.broadcast_to(g, self.data.shape).copy())
                    return
                if not keepdims:
                    g = np.expand_dims(g, axis)
                self._accumulate(np.broadcast_to(g, self.data.shape).copy())
            out._backward = backward
        return out

    def mean(self, axis=None, keepdims: bool = False):
        if axis is None:
            n = self.data.size
        elif isinstance(axis, tuple):
            n = int(np.prod([self.data.shape[a] for a in axis]))
        else:
            n = self.data.shape[axis]
        return self.sum(axis=axis, keepdims=keepdims) / float(n)


def as_tensor(value) -> Tensor:
    return value if isinstance(value, Tensor) else Tensor(value)


def _make(data: np.ndarray, parents: tuple[Tensor, ...]) -> Tensor:
    out = Tensor(data)
    if _grad_enabled and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = parents
    return out


def gather_last(x: Tensor, index: np.ndarray) -> Tensor:
    """out[..., ] = x[..., index[...]] along the last axis; index is constant."""
    index = np.asarray(index, dtype=np.int64)
    picked = np.take_along_axis(x.data, index[..., None], axis=-1)[..., 0]
    out = _make(picked, (x,))
    if out._parents:
        lead = tuple(np.indices(index.shape))
        def backward(g):
            full = np.zeros_like(x.data)
            np.add.at(full, lead + (index,), g)
            x._accumulate(full)
        out._backward = backward
    return out


def scatter_add_last(values: Tensor, index: np.ndarray, size: int) -> Tensor:
    """out[..., j] = sum of values[..., i] with index[..., i] == j.

    Index entries are constants in [0, size); leading axes are preserved.
    """
    index = np.asarray(index, dtype=np.int64)
    if index.shape != values.data.shape:
        raise ValueError("scatter index must match values shape")
    out_data = np.zeros(values.data.shape[:-1] + (size,))
    lead = tuple(np.indices(index.shape))
    np.add.at(out_data, lead[:-1] + (index,), values.data)
    out = _make(out_data, (values,))
    if out._parents:
        def backward(g):
            values._accumulate(g[lead[:-1] + (index,)])
        out._backward = backward
    return out


def softmax(x: Tensor, mask: np.ndarray | None = None) -> Tensor:
    """Numerically stable softmax over the last axis.

    mask (boolean, constant) marks entries to keep; masked-out entries get
    probability exactly 0. Every row must keep at least one entry.
    """
    logits = x.data
    if mask is not None:
        mask = np.asarray(mask, dtype=bool)
        if not mask.any(axis=-1).all():
            raise ValueError("softmax mask leaves a row with no legal entries")
        logits = np.where(mask, logits, -np.inf)
    shifted = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    p = e / e.sum(axis=-1, keepdims=True)
    out = _make(p, (x,))
    if out._parents:
        def backward(g):
            inner = (g * p).sum(axis=-1, keepdims=True)
            x._accumulate(p * (g - inner))
        out._backward = backward
    return out


def log_softmax(x: Tensor, mask: np.ndarray | None = None) -> Tensor:
    """Log of softmax over the last axis; masked-out entries are -inf."""
    logits = x.data
    if mask is not None:
        mask = np.asarray(mask, dtype=bool)
        if not mask.any(axis=-1).all():
            raise ValueError("log_softmax mask leaves a row with no legal entries")
        logits = np.where(mask, logits, -np.inf)
    m = logits.max(axis=-1, keepdims=True)
    shifted = logits - m
    e = np.exp(shifted)
    lse = m + np.log(e.sum(axis=-1, keepdims=True))
    out = _make(logits - lse, (x,))
    if out._parents:
        p = e / e.sum(axis=-1, keepdims=True)
        grad_gate = mask if mask is not None else None
        def backward(g):
            if grad_gate is not None:
                g = np.where(grad_gate, g, 0.0)
            inner = g.sum(axis=-1, keepdims=True)
            x._accumulate(g - p * inner)
        out._backward = backward
    return out


def layer_norm(x: Tensor, gamma: Tensor, beta: Tensor, eps: float = 1e-5) -> Tensor:
    """Layer normalization over the last axis with learned affine."""
    mu = x.data.mean(axis=-1, keepdims=True)
    xc = x.data - mu
    var = (xc ** 2).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = xc * inv
    out = _make(xhat * gamma.data + beta.data, (x, gamma, beta))
    if out._parents:
        def backward(g):
            if gamma.requires_grad:
                axes = tuple(range(g.ndim - 1))
                gamma._accumulate((g * xhat).sum(axis=axes))
            if beta.requires_grad:
                axes = tuple(range(g.ndim - 1))
                beta._accumulate(g.sum(axis=axes))
            if x.requires_grad:
                gh = g * gamma.data
                term = gh - gh.mean(axis=-1, keepdims=True) - xhat * (gh * xhat).mean(axis=-1, keepdims=True)
                x._accumulate(term * inv)
        out._backward = backward
    return out


def numeric_gradient(f, x: np.ndarray, h: float = 1e-4) -> np.ndarray:
    """Central finite differences of scalar f at x, elementwise."""
    x = np.array(x, dtype=np.float64)
    grad = np.zeros_like(x)
    flat = x.reshape(-1)
    gflat = grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        fp = f(x)
        flat[i] = orig - h
        fm = f(x)
        flat[i] = orig
        gflat[i] = (fp - fm) / (2.0 * h)
    return grad
