"""Reverse-mode autodiff over numpy arrays.

A Tensor wraps an ndarray and remembers how it was produced; backward()
walks the graph in reverse topological order and accumulates gradients
into every tensor that requires them. Graph recording can be switched
off (no_grad) so inference does not retain intermediates.
"""

from __future__ import annotations

from contextlib import contextmanager

import numpy as np

from sepkit.errors import ShapeMismatch

_grad_enabled = True


@contextmanager
def no_grad():
    """Disable graph recording inside the with-block."""
    global _grad_enabled
    prev = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = prev


def grad_enabled() -> bool:
    return _grad_enabled


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum a broadcast gradient back down to the original operand shape."""
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data)
        self.grad = None
        self.requires_grad = requires_grad
        self._parents = ()
        self._backward = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"

    def accumulate(self, grad: np.ndarray) -> None:
        if self.grad is None:
            # Copy: callers may hand over views or arrays they still mutate.
            self.grad = np.array(grad, dtype=self.data.dtype)
        else:
            self.grad += grad

    def accumulate_fresh(self, grad: np.ndarray) -> None:
        """accumulate() for freshly allocated arrays the caller gives up.

        Skips the defensive copy, so the caller must not keep or reuse
        `grad` and it must not alias memory anything else holds.
        """
        if self.grad is None and grad.dtype == self.data.dtype:
            self.grad = grad
        else:
            self.accumulate(grad)

    def zero_grad(self) -> None:
        self.grad = None

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def backward(self) -> None:
        """Backpropagate from a scalar tensor through the recorded graph."""
        if self.data.size != 1:
            raise ShapeMismatch("backward() needs a scalar loss")
        topo = []
        visited = set()
        stack = [(self, False)]
        # Iterative postorder; the graph can be deeper than the recursion limit.
        while stack:
            node, expanded = stack.pop()
            if expanded:
                topo.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if id(p) not in visited:
                    stack.append((p, False))
        self.grad = np.ones_like(self.data)
        for node in reversed(topo):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)

    # -- graph construction ------------------------------------------------

    @staticmethod
    def _make(data, parents, backward):
        out = Tensor(data)
        if _grad_enabled and any(p.requires_grad for p in parents):
            out.requires_grad = True
            out._parents = tuple(parents)
            out._backward = backward
        return out

    def __add__(self, other):
        other = other if isinstance(other, Tensor) else Tensor(other)

        def back(g):
            if self.requires_grad:
                self.accumulate(_unbroadcast(g, self.data.shape))
            if other.requires_grad:
                other.accumulate(_unbroadcast(g, other.data.shape))

        return Tensor._make(self.data + other.data, (self, other), back)

    __radd__ = __add__

    def __neg__(self):
        def back(g):
            if self.requires_grad:
                self.accumulate_fresh(-g)

        return Tensor._make(-self.data, (self,), back)

    def __sub__(self, other):
        other = other if isinstance(other, Tensor) else Tensor(other)

        def back(g):
            if self.requires_grad:
                self.accumulate(_unbroadcast(g, self.data.shape))
            if other.requires_grad:
                other.accumulate_fresh(_unbroadcast(-g, other.data.shape))

        return Tensor._make(self.data - other.data, (self, other), back)

    def __mul__(self, other):
        other = other if isinstance(other, Tensor) else Tensor(other)

        def back(g):
            if self.requires_grad:
                self.accumulate_fresh(_unbroadcast(g * other.data, self.data.shape))
            if other.requires_grad:
                other.accumulate_fresh(_unbroadcast(g * self.data, other.data.shape))

        return Tensor._make(self.data * other.data, (self, other), back)

    __rmul__ = __mul__

    def __matmul__(self, other):
        if not isinstance(other, Tensor):
            other = Tensor(other)

        def back(g):
            if self.requires_grad:
                self.accumulate_fresh(g @ other.data.T)
            if other.requires_grad:
                other.accumulate_fresh(self.data.T @ g)

        return Tensor._make(self.data @ other.data, (self, other), back)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        old = self.data.shape

        def back(g):
            if self.requires_grad:
                self.accumulate(g.reshape(old))

        return Tensor._make(self.data.reshape(shape), (self,), back)

    def sum(self, axis=None, keepdims: bool = False):
        def back(g):
            if not self.requires_grad:
                return
            if axis is None:
                self.accumulate_fresh(np.broadcast_to(g, self.data.shape).copy())
                return
            if not keepdims:
                g = np.expand_dims(g, axis)
            self.accumulate_fresh(np.broadcast_to(g, self.data.shape).copy())

        return Tensor._make(self.data.sum(axis=axis, keepdims=keepdims),
                            (self,), back)

    def mean(self, axis=None, keepdims: bool = False):
        if axis is None:
            count = self.data.size
        else:
            axes = axis if isinstance(axis, tuple) else (axis,)
            count = 1
            for a in axes:
                count *= self.data.shape[a]

        def back(g):
            if not self.requires_grad:
                return
            if axis is not None and not keepdims:
                g = np.expand_dims(g, axis)
            self.accumulate_fresh(np.broadcast_to(g, self.data.shape) / count)

        return Tensor._make(self.data.mean(axis=axis, keepdims=keepdims),
                            (self,), back)


def relu(x: Tensor) -> Tensor:
    """Elementwise max(x, 0); the gradient is gated by x > 0."""
    y = np.maximum(x.data, 0)

    def back(g):
        if x.requires_grad:
            # y > 0 exactly where x > 0, so the output doubles as the mask.
            x.accumulate_fresh(g * (y > 0))

    return Tensor._make(y, (x,), back)


def mse_loss(pred: Tensor, label: Tensor) -> Tensor:
    """Mean over all elements of (pred - label)^2."""
    if not isinstance(label, Tensor):
        label = Tensor(label)
    if pred.data.shape != label.data.shape:
        raise ShapeMismatch(
            f"pred {pred.data.shape} vs label {label.data.shape}"
        )
    diff = pred - label
    return (diff * diff).mean()
