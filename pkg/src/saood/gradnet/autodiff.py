"""Small reverse-mode automatic differentiation over numpy arrays.

A ``Tensor`` records the operation that produced it; ``backward`` walks the
graph in reverse topological order and accumulates ``grad`` on every node.
Only the operations needed by the classifier and its losses are provided.
"""

from __future__ import annotations

import numpy as np


def _unbroadcast(grad, shape):
    # Sum out axes that were broadcast in the forward pass.
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "op")
    __array_priority__ = 100

    def __init__(self, data, requires_grad=False, _parents=(), op=""):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self.requires_grad = requires_grad or any(p.requires_grad for p in _parents)
        self._parents = _parents
        self._backward = None
        self.op = op

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    def __len__(self):
        return len(self.data)

    def __repr__(self):
        return f"Tensor({self.data!r}, op={self.op!r})"

    def item(self):
        return float(self.data)

    def detach(self):
        return Tensor(self.data)

    # -- arithmetic -------------------------------------------------------

    def __add__(self, other):
        other = as_tensor(other)
        out = Tensor(self.data + other.data, _parents=(self, other), op="add")

        def backward(g):
            return _unbroadcast(g, self.shape), _unbroadcast(g, other.shape)

        out._backward = backward
        return out

    __radd__ = __add__

    def __neg__(self):
        out = Tensor(-self.data, _parents=(self,), op="neg")
        out._backward = lambda g: (-g,)
        return out

    def __sub__(self, other):
        return self + (-as_tensor(other))

    def __rsub__(self, other):
        return as_tensor(other) + (-self)

    def __mul__(self, other):
        other = as_tensor(other)
        out = Tensor(self.data * other.data, _parents=(self, other), op="mul")

        def backward(g):
            return (
                _unbroadcast(g * other.data, self.shape),
                _unbroadcast(g * self.data, other.shape),
            )

        out._backward = backward
        return out

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = as_tensor(other)
        out = Tensor(self.data / other.data, _parents=(self, other), op="div")

        def backward(g):
            return (
                _unbroadcast(g / other.data, self.shape),
                _unbroadcast(-g * self.data / other.data**2, other.shape),
            )

        out._backward = backward
        return out

    def __rtruediv__(self, other):
        return as_tensor(other) / self

    def __matmul__(self, other):
        other = as_tensor(other)
        out = Tensor(self.data @ other.data, _parents=(self, other), op="matmul")

        def backward(g):
            return g @ other.data.T, self.data.T @ g

        out._backward = backward
        return out

    @property
    def T(self):
        out = Tensor(self.data.T, _parents=(self,), op="transpose")
        out._backward = lambda g: (g.T,)
        return out

    def __getitem__(self, index):
        out = Tensor(self.data[index], _parents=(self,), op="getitem")

        def backward(g):
            full = np.zeros_like(self.data)
            np.add.at(full, index, g)
            return (full,)

        out._backward = backward
        return out

    # -- reductions -------------------------------------------------------

    def sum(self, axis=None, keepdims=False):
        out = Tensor(self.data.sum(axis=axis, keepdims=keepdims), _parents=(self,), op="sum")

        def backward(g):
            if axis is not None and not keepdims:
                g = np.expand_dims(g, axis)
            return (np.broadcast_to(g, self.shape).copy(),)

        out._backward = backward
        return out

    def mean(self, axis=None):
        n = self.data.size if axis is None else self.data.shape[axis]
        return self.sum(axis=axis) * (1.0 / n)

    # -- backprop ---------------------------------------------------------

    def backward(self, grad=None):
        if grad is None:
            if self.data.size != 1:
                raise ValueError("backward() without a seed needs a scalar output")
            grad = np.ones_like(self.data)
        order = []
        seen = set()

        def visit(node):
            if id(node) in seen or not node.requires_grad:
                return
            seen.add(id(node))
            for parent in node._parents:
                visit(parent)
            order.append(node)

        visit(self)
        self.grad = np.asarray(grad, dtype=np.float64)
        for node in reversed(order):
            if node._backward is None or node.grad is None:
                continue
            for parent, pg in zip(node._parents, node._backward(node.grad)):
                if not parent.requires_grad:
                    continue
                parent.grad = pg if parent.grad is None else parent.grad + pg


def as_tensor(x):
    return x if isinstance(x, Tensor) else Tensor(x)


def exp(x):
    x = as_tensor(x)
    val = np.exp(x.data)
    out = Tensor(val, _parents=(x,), op="exp")
    out._backward = lambda g: (g * val,)
    return out


def log(x):
    x = as_tensor(x)
    out = Tensor(np.log(x.data), _parents=(x,), op="log")
    out._backward = lambda g: (g / x.data,)
    return out


def log1p(x):
    x = as_tensor(x)
    out = Tensor(np.log1p(x.data), _parents=(x,), op="log1p")
    out._backward = lambda g: (g / (1.0 + x.data),)
    return out


def clamp_min(x, floor):
    """max(x, floor); the gradient is zero where the floor is active."""
    x = as_tensor(x)
    mask = x.data >= floor
    out = Tensor(np.where(mask, x.data, floor), _parents=(x,), op="clamp_min")
    out._backward = lambda g: (g * mask,)
    return out


def relu(x):
    x = as_tensor(x)
    mask = x.data > 0
    out = Tensor(x.data * mask, _parents=(x,), op="relu")
    out._backward = lambda g: (g * mask,)
    return out


def row_max(x):
    """Row-wise max as a constant (used only for shift-invariant stabilisation)."""
    return Tensor(as_tensor(x).data.max(axis=-1, keepdims=True))
