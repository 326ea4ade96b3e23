"""Reverse-mode automatic differentiation over numpy arrays.

Small dynamic-graph engine sized for dense feed-forward networks: every
operation builds a node holding its value, its parents, and a closure that
routes the upstream gradient to the parents.  ``backward()`` on a scalar
node topologically sorts the graph and accumulates exact gradients into
every node with ``requires_grad``.

All values are float64.  Shapes follow numpy broadcasting; gradients of
broadcast operands are summed back down to the operand shape.
"""

from __future__ import annotations

from typing import Callable, Iterable, Sequence, Union

import numpy as np

ArrayLike = Union[float, int, Sequence, np.ndarray]


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum `grad` down to `shape` (inverse of numpy broadcasting)."""
    if grad.shape == shape:
        return grad
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, dim in enumerate(shape):
        if dim == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


class Tensor:
    """One node of the computation graph."""

    __slots__ = ("value", "grad", "requires_grad", "_parents", "_backward")

    def __init__(
        self,
        value: ArrayLike,
        requires_grad: bool = False,
        _parents: tuple["Tensor", ...] = (),
        _backward: Callable[[np.ndarray], None] | None = None,
    ):
        self.value = np.asarray(value, dtype=np.float64)
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad or any(p.requires_grad for p in _parents)
        self._parents = _parents
        self._backward = _backward

    # -- graph traversal ----------------------------------------------------

    def _topo(self) -> list["Tensor"]:
        order: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
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
                if p.requires_grad and id(p) not in seen:
                    stack.append((p, False))
        return order

    def backward(self) -> None:
        """Backpropagate from this scalar; grads of earlier calls are reset."""
        if self.value.size != 1:
            raise ValueError(
                f"backward() requires a scalar root, got shape {self.value.shape}"
            )
        if not self.requires_grad:
            return
        order = self._topo()
        for node in order:
            node.grad = None
        self.grad = np.ones_like(self.value)
        for node in reversed(order):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)

    def _accumulate(self, g: np.ndarray) -> None:
        if not self.requires_grad:
            return
        g = _unbroadcast(g, self.value.shape)
        if self.grad is None:
            self.grad = g.copy()
        else:
            self.grad += g

    # -- convenience --------------------------------------------------------

    @property
    def shape(self) -> tuple[int, ...]:
        return self.value.shape

    def item(self) -> float:
        return float(self.value)

    def __repr__(self) -> str:
        return f"Tensor(shape={self.value.shape}, requires_grad={self.requires_grad})"

    # operator sugar; scalars and arrays are wrapped as constants
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

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __neg__(self):
        return mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)


def as_tensor(x: ArrayLike | Tensor) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def parameter(value: np.ndarray) -> Tensor:
    """Leaf node whose gradient will be collected."""
    return Tensor(value, requires_grad=True)


# -- arithmetic ---------------------------------------------------------------


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out = Tensor(a.value + b.value, _parents=(a, b))

    def bwd(g):
        a._accumulate(g)
        b._accumulate(g)

    out._backward = bwd
    return out


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out = Tensor(a.value - b.value, _parents=(a, b))

    def bwd(g):
        a._accumulate(g)
        b._accumulate(-g)

    out._backward = bwd
    return out


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out = Tensor(a.value * b.value, _parents=(a, b))

    def bwd(g):
        a._accumulate(g * b.value)
        b._accumulate(g * a.value)

    out._backward = bwd
    return out


def div(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out = Tensor(a.value / b.value, _parents=(a, b))

    def bwd(g):
        a._accumulate(g / b.value)
        b._accumulate(-g * a.value / (b.value * b.value))

    out._backward = bwd
    return out


def matmul(a, b) -> Tensor:
    """2-D matrix product."""
    a, b = as_tensor(a), as_tensor(b)
    if a.value.ndim != 2 or b.value.ndim != 2:
        raise ValueError("matmul expects 2-D operands")
    out = Tensor(a.value @ b.value, _parents=(a, b))

    def bwd(g):
        a._accumulate(g @ b.value.T)
        b._accumulate(a.value.T @ g)

    out._backward = bwd
    return out


def transpose(a) -> Tensor:
    a = as_tensor(a)
    out = Tensor(a.value.T, _parents=(a,))
    out._backward = lambda g: a._accumulate(g.T)
    return out


# -- elementwise functions ----------------------------------------------------


def tanh(a) -> Tensor:
    a = as_tensor(a)
    y = np.tanh(a.value)
    out = Tensor(y, _parents=(a,))
    out._backward = lambda g: a._accumulate(g * (1.0 - y * y))
    return out


def relu(a) -> Tensor:
    a = as_tensor(a)
    out = Tensor(np.maximum(a.value, 0.0), _parents=(a,))
    out._backward = lambda g: a._accumulate(g * (a.value > 0.0))
    return out


def sigmoid(a) -> Tensor:
    a = as_tensor(a)
    y = 1.0 / (1.0 + np.exp(-a.value))
    out = Tensor(y, _parents=(a,))
    out._backward = lambda g: a._accumulate(g * y * (1.0 - y))
    return out


def exp(a) -> Tensor:
    a = as_tensor(a)
    y = np.exp(a.value)
    out = Tensor(y, _parents=(a,))
    out._backward = lambda g: a._accumulate(g * y)
    return out


def log(a) -> Tensor:
    a = as_tensor(a)
    out = Tensor(np.log(a.value), _parents=(a,))
    out._backward = lambda g: a._accumulate(g / a.value)
    return out


def square(a) -> Tensor:
    a = as_tensor(a)
    out = Tensor(a.value * a.value, _parents=(a,))
    out._backward = lambda g: a._accumulate(g * 2.0 * a.value)
    return out


def sqrt(a) -> Tensor:
    a = as_tensor(a)
    y = np.sqrt(a.value)
    out = Tensor(y, _parents=(a,))
    out._backward = lambda g: a._accumulate(g * 0.5 / y)
    return out


def clip_min(a, floor: float) -> Tensor:
    """max(a, floor); gradient passes only where a > floor."""
    a = as_tensor(a)
    out = Tensor(np.maximum(a.value, floor), _parents=(a,))
    out._backward = lambda g: a._accumulate(g * (a.value > floor))
    return out


def clip_max(a, ceil: float) -> Tensor:
    """min(a, ceil); gradient passes only where a < ceil."""
    a = as_tensor(a)
    out = Tensor(np.minimum(a.value, ceil), _parents=(a,))
    out._backward = lambda g: a._accumulate(g * (a.value < ceil))
    return out


# -- reductions ---------------------------------------------------------------


def sum_(a, axis: int | None = None, keepdims: bool = False) -> Tensor:
    a = as_tensor(a)
    out = Tensor(a.value.sum(axis=axis, keepdims=keepdims), _parents=(a,))

    def bwd(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        a._accumulate(np.broadcast_to(g, a.value.shape))

    out._backward = bwd
    return out


def mean(a, axis: int | None = None, keepdims: bool = False) -> Tensor:
    a = as_tensor(a)
    n = a.value.size if axis is None else a.value.shape[axis]
    return mul(sum_(a, axis=axis, keepdims=keepdims), 1.0 / n)


def logsumexp(a, axis: int = 1, keepdims: bool = False) -> Tensor:
    """Max-shifted log-sum-exp along `axis`; -inf entries are excluded cleanly."""
    a = as_tensor(a)
    m = np.max(a.value, axis=axis, keepdims=True)
    m = np.where(np.isfinite(m), m, 0.0)
    e = np.exp(a.value - m)
    s = e.sum(axis=axis, keepdims=True)
    y = m + np.log(s)
    w = e / s  # softmax weights, the exact Jacobian row
    if not keepdims:
        y = np.squeeze(y, axis=axis)
    out = Tensor(y, _parents=(a,))

    def bwd(g):
        if not keepdims:
            g = np.expand_dims(g, axis)
        a._accumulate(g * w)

    out._backward = bwd
    return out


def softmax(a, axis: int = -1) -> Tensor:
    """Row-stochastic softmax with max subtraction for overflow safety."""
    a = as_tensor(a)
    shifted = a.value - np.max(a.value, axis=axis, keepdims=True)
    e = np.exp(shifted)
    p = e / e.sum(axis=axis, keepdims=True)
    out = Tensor(p, _parents=(a,))

    def bwd(g):
        inner = (g * p).sum(axis=axis, keepdims=True)
        a._accumulate(p * (g - inner))

    out._backward = bwd
    return out


# -- indexing -----------------------------------------------------------------


def gather_rows(a, indices: np.ndarray) -> Tensor:
    """out[i] = a[i, indices[i]] for a 2-D tensor."""
    a = as_tensor(a)
    idx = np.asarray(indices, dtype=np.intp)
    rows = np.arange(a.value.shape[0])
    out = Tensor(a.value[rows, idx], _parents=(a,))

    def bwd(g):
        full = np.zeros_like(a.value)
        np.add.at(full, (rows, idx), g)
        a._accumulate(full)

    out._backward = bwd
    return out


def diagonal(a) -> Tensor:
    """Main diagonal of a square 2-D tensor."""
    a = as_tensor(a)
    n = a.value.shape[0]
    out = Tensor(np.diagonal(a.value).copy(), _parents=(a,))

    def bwd(g):
        full = np.zeros_like(a.value)
        full[np.arange(n), np.arange(n)] = g
        a._accumulate(full)

    out._backward = bwd
    return out


def every_second_column(a, offset: int) -> Tensor:
    """Columns offset, offset+2, ... of a 2-D tensor (offset 0 or 1)."""
    a = as_tensor(a)
    out = Tensor(a.value[:, offset::2].copy(), _parents=(a,))

    def bwd(g):
        full = np.zeros_like(a.value)
        full[:, offset::2] = g
        a._accumulate(full)

    out._backward = bwd
    return out


def interleave_columns(a, b) -> Tensor:
    """Inverse of the even/odd split: out[:, 0::2] = a, out[:, 1::2] = b."""
    a, b = as_tensor(a), as_tensor(b)
    m, half = a.value.shape
    full = np.empty((m, 2 * half), dtype=np.float64)
    full[:, 0::2] = a.value
    full[:, 1::2] = b.value
    out = Tensor(full, _parents=(a, b))

    def bwd(g):
        a._accumulate(g[:, 0::2])
        b._accumulate(g[:, 1::2])

    out._backward = bwd
    return out


def reshape(a, shape: tuple[int, ...]) -> Tensor:
    a = as_tensor(a)
    out = Tensor(a.value.reshape(shape), _parents=(a,))
    out._backward = lambda g: a._accumulate(g.reshape(a.value.shape))
    return out


def concat_flat(tensors: Iterable[Tensor]) -> Tensor:
    """Concatenate flattened tensors into one vector."""
    ts = [as_tensor(t) for t in tensors]
    pieces = [t.value.ravel() for t in ts]
    sizes = [p.size for p in pieces]
    out = Tensor(np.concatenate(pieces), _parents=tuple(ts))

    def bwd(g):
        pos = 0
        for t, n in zip(ts, sizes):
            t._accumulate(g[pos : pos + n].reshape(t.value.shape))
            pos += n

    out._backward = bwd
    return out
