"""A small reverse-mode automatic differentiation engine over numpy arrays.

Only the operations needed by coupling flows are provided. The free functions
:func:`exp`, :func:`tanh`, :func:`log` and :func:`sum_` accept either a
:class:`Tensor` or a plain array, so model code can be written once and run
with or without gradient tracking.
"""

from __future__ import annotations

import numpy as np


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum ``grad`` down to ``shape`` after numpy broadcasting."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, n in enumerate(shape):
        if n == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


class Tensor:
    __array_priority__ = 1000  # make ndarray <op> Tensor defer to Tensor

    def __init__(self, data, parents=(), backward=None, requires_grad=False):
        self.data = np.asarray(data, dtype=float)
        self.grad = None
        self.requires_grad = requires_grad or any(p.requires_grad for p in parents)
        self._parents = parents
        self._backward = backward

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"

    @property
    def shape(self):
        return self.data.shape

    def _accumulate(self, g):
        if not self.requires_grad:
            return
        g = _unbroadcast(g, self.data.shape)
        self.grad = g if self.grad is None else self.grad + g

    def __add__(self, other):
        other = as_tensor(other)

        def back(g):
            self._accumulate(g)
            other._accumulate(g)

        return Tensor(self.data + other.data, (self, other), back)

    __radd__ = __add__

    def __neg__(self):
        return Tensor(-self.data, (self,), lambda g: self._accumulate(-g))

    def __sub__(self, other):
        return self + (-as_tensor(other))

    def __rsub__(self, other):
        return as_tensor(other) + (-self)

    def __mul__(self, other):
        other = as_tensor(other)

        def back(g):
            self._accumulate(g * other.data)
            other._accumulate(g * self.data)

        return Tensor(self.data * other.data, (self, other), back)

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = as_tensor(other)

        def back(g):
            self._accumulate(g / other.data)
            other._accumulate(-g * self.data / other.data**2)

        return Tensor(self.data / other.data, (self, other), back)

    def __matmul__(self, other):
        other = as_tensor(other)

        def back(g):
            self._accumulate(g @ other.data.T)
            other._accumulate(self.data.T @ g)

        return Tensor(self.data @ other.data, (self, other), back)

    def __rmatmul__(self, other):
        return as_tensor(other) @ self

    def __pow__(self, k):
        def back(g):
            self._accumulate(g * k * self.data ** (k - 1))

        return Tensor(self.data**k, (self,), back)

    def exp(self):
        out = np.exp(self.data)
        return Tensor(out, (self,), lambda g: self._accumulate(g * out))

    def log(self):
        return Tensor(np.log(self.data), (self,), lambda g: self._accumulate(g / self.data))

    def tanh(self):
        out = np.tanh(self.data)
        return Tensor(out, (self,), lambda g: self._accumulate(g * (1.0 - out * out)))

    def sum(self, axis=None):
        shape = self.data.shape

        def back(g):
            if axis is not None:
                g = np.expand_dims(g, axis)
            self._accumulate(np.broadcast_to(g, shape))

        return Tensor(self.data.sum(axis=axis), (self,), back)

    def mean(self):
        return self.sum() * (1.0 / self.data.size)

    def backward(self):
        """Accumulate d(self)/d(leaf) into every leaf with ``requires_grad``."""
        order = []
        seen = set()
        stack = [(self, False)]
        # iterative post-order DFS; graphs here can be a few hundred nodes deep
        while stack:
            node, done = stack.pop()
            if done:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if p.requires_grad and id(p) not in seen:
                    stack.append((p, False))
        self.grad = np.ones_like(self.data)
        for node in reversed(order):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def exp(x):
    return x.exp() if isinstance(x, Tensor) else np.exp(x)


def tanh(x):
    return x.tanh() if isinstance(x, Tensor) else np.tanh(x)


def log(x):
    return x.log() if isinstance(x, Tensor) else np.log(x)


def sum_(x, axis=None):
    return x.sum(axis=axis) if isinstance(x, Tensor) else np.sum(x, axis=axis)


def value(x) -> np.ndarray:
    return x.data if isinstance(x, Tensor) else np.asarray(x)
