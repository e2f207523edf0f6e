"""Reverse-mode automatic differentiation over dense float64 arrays.

Every operation returns a new :class:`Tensor` that remembers its parents and a
closure mapping the output gradient to parent gradients. Gradients are
accumulated in a dictionary local to :func:`backward`, so tensors are never
mutated after construction and independent graphs can be differentiated
concurrently.
"""

from __future__ import annotations

from typing import Callable, Iterable, Mapping

import numpy as np

from rulfp.errors import NumericalError

DTYPE = np.float64


def _as_array(x) -> np.ndarray:
    return np.asarray(x, dtype=DTYPE)


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum ``g`` down to ``shape`` after numpy broadcasting."""
    if g.shape == shape:
        return g
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, n in enumerate(shape):
        if n == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


class Tensor:
    __slots__ = ("data", "requires_grad", "parents", "backward_fn", "op", "name")

    __array_ufunc__ = None  # ndarray <op> Tensor defers to the Tensor operator

    def __init__(self, data, requires_grad: bool = False, name: str | None = None,
                 parents: tuple = (), backward_fn=None, op: str = "leaf"):
        self.data = _as_array(data)
        self.requires_grad = requires_grad
        self.parents = parents
        self.backward_fn = backward_fn
        self.op = op
        self.name = name

    def __repr__(self):
        label = f" name={self.name!r}" if self.name else ""
        return f"Tensor(op={self.op!r}{label}, shape={self.shape})"

    @property
    def shape(self) -> tuple:
        return self.data.shape

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def ndim(self) -> int:
        return self.data.ndim

    def item(self) -> float:
        return float(self.data.reshape(-1)[0]) if self.data.size == 1 else float("nan")

    def numpy(self) -> np.ndarray:
        return self.data

    # ------------------------------------------------------------------ graph
    @staticmethod
    def _result(data, parents, backward_fn, op):
        parents = tuple(parents)
        req = any(p.requires_grad for p in parents)
        return Tensor(data, requires_grad=req, parents=parents if req else (),
                      backward_fn=backward_fn if req else None, op=op)

    # ------------------------------------------------------------- arithmetic
    def __add__(self, other):
        other = as_tensor(other)
        a_shape, b_shape = self.shape, other.shape

        def back(g):
            return _unbroadcast(g, a_shape), _unbroadcast(g, b_shape)
        return Tensor._result(self.data + other.data, (self, other), back, "add")

    __radd__ = __add__

    def __sub__(self, other):
        other = as_tensor(other)
        a_shape, b_shape = self.shape, other.shape

        def back(g):
            return _unbroadcast(g, a_shape), _unbroadcast(-g, b_shape)
        return Tensor._result(self.data - other.data, (self, other), back, "sub")

    def __rsub__(self, other):
        return as_tensor(other) - self

    def __mul__(self, other):
        other = as_tensor(other)
        a, b = self.data, other.data

        def back(g):
            return _unbroadcast(g * b, a.shape), _unbroadcast(g * a, b.shape)
        return Tensor._result(a * b, (self, other), back, "mul")

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = as_tensor(other)
        a, b = self.data, other.data

        def back(g):
            return _unbroadcast(g / b, a.shape), _unbroadcast(-g * a / (b * b), b.shape)
        return Tensor._result(a / b, (self, other), back, "div")

    def __rtruediv__(self, other):
        return as_tensor(other) / self

    def __neg__(self):
        return Tensor._result(-self.data, (self,), lambda g: (-g,), "neg")

    def __pow__(self, exponent: float):
        if isinstance(exponent, Tensor):
            raise TypeError("tensor exponents: use exp(b * log(a))")
        p = float(exponent)
        a = self.data

        def back(g):
            return (g * p * a ** (p - 1.0),)
        return Tensor._result(a ** p, (self,), back, "pow")

    def __matmul__(self, other):
        other = as_tensor(other)
        a, b = self.data, other.data
        if a.ndim != 2 or b.ndim != 2:
            raise ValueError("matmul expects 2-D operands")

        def back(g):
            return g @ b.T, a.T @ g
        return Tensor._result(a @ b, (self, other), back, "matmul")

    def __rmatmul__(self, other):
        return as_tensor(other) @ self

    # --------------------------------------------------------------- shaping
    def __getitem__(self, idx):
        shape = self.shape
        basic = _is_basic_index(idx)

        def back(g):
            full = np.zeros(shape, dtype=DTYPE)
            if basic:
                full[idx] += g
            else:
                np.add.at(full, idx, g)
            return (full,)
        return Tensor._result(self.data[idx], (self,), back, "index")

    def reshape(self, *shape):
        old = self.shape
        return Tensor._result(self.data.reshape(*shape), (self,),
                              lambda g: (g.reshape(old),), "reshape")

    def sum(self, axis=None, keepdims: bool = False):
        shape = self.shape

        def back(g):
            if axis is not None and not keepdims:
                g = np.expand_dims(g, axis)
            return (np.broadcast_to(g, shape).copy(),)
        return Tensor._result(self.data.sum(axis=axis, keepdims=keepdims), (self,), back, "sum")

    def mean(self, axis=None, keepdims: bool = False):
        n = self.data.size if axis is None else self.shape[axis]
        return self.sum(axis=axis, keepdims=keepdims) / float(n)

    # -------------------------------------------------------- elementwise maps
    def exp(self):
        out = np.exp(self.data)
        return Tensor._result(out, (self,), lambda g: (g * out,), "exp")

    def log(self):
        a = self.data
        with np.errstate(divide="ignore", invalid="ignore"):
            out = np.log(a)
        return Tensor._result(out, (self,), lambda g: (g / a,), "log")

    def tanh(self):
        out = np.tanh(self.data)
        return Tensor._result(out, (self,), lambda g: (g * (1.0 - out * out),), "tanh")

    def sigmoid(self):
        out = _sigmoid(self.data)
        return Tensor._result(out, (self,), lambda g: (g * out * (1.0 - out),), "sigmoid")

    def elu(self):
        a = self.data
        neg = np.expm1(np.minimum(a, 0.0))
        out = np.where(a > 0, a, neg)
        return Tensor._result(out, (self,), lambda g: (g * np.where(a > 0, 1.0, neg + 1.0),), "elu")

    def softplus(self):
        a = self.data
        out = np.maximum(a, 0.0) + np.log1p(np.exp(-np.abs(a)))
        return Tensor._result(out, (self,), lambda g: (g * _sigmoid(a),), "softplus")

    def relu(self):
        a = self.data
        return Tensor._result(np.maximum(a, 0.0), (self,), lambda g: (g * (a > 0),), "relu")

    def clamp_min(self, lo: float):
        a = self.data
        return Tensor._result(np.maximum(a, lo), (self,), lambda g: (g * (a > lo),), "clamp_min")

    def log_softmax(self, axis: int = -1):
        a = self.data
        shifted = a - a.max(axis=axis, keepdims=True)
        out = shifted - np.log(np.exp(shifted).sum(axis=axis, keepdims=True))
        soft = np.exp(out)

        def back(g):
            return (g - soft * g.sum(axis=axis, keepdims=True),)
        return Tensor._result(out, (self,), back, "log_softmax")


def _sigmoid(a: np.ndarray) -> np.ndarray:
    e = np.exp(-np.abs(a))
    return np.where(a >= 0, 1.0 / (1.0 + e), e / (1.0 + e))


def _is_basic_index(idx) -> bool:
    items = idx if isinstance(idx, tuple) else (idx,)
    return all(isinstance(i, (slice, int, np.integer)) or i is Ellipsis or i is None for i in items)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def elementwise(x: Tensor, fn: Callable[[np.ndarray], np.ndarray],
                dfn: Callable[[np.ndarray, np.ndarray], np.ndarray], op: str) -> Tensor:
    """Lift a scalar function with known derivative into the graph.

    ``dfn(x, fn(x))`` must return the elementwise derivative.
    """
    x = as_tensor(x)
    a = x.data
    out = fn(a)
    return Tensor._result(out, (x,), lambda g: (g * dfn(a, out),), op)


def concat(tensors: Iterable[Tensor], axis: int = -1) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    sizes = [t.shape[axis] for t in tensors]
    splits = np.cumsum(sizes)[:-1]

    def back(g):
        return tuple(np.split(g, splits, axis=axis))
    return Tensor._result(np.concatenate([t.data for t in tensors], axis=axis), tensors, back, "concat")


def _topological(root: Tensor) -> list[Tensor]:
    order, seen = [], set()
    stack = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node.parents:
            if id(p) not in seen:
                stack.append((p, False))
    return order


def backward(loss: Tensor) -> dict[int, np.ndarray]:
    """Gradients of a scalar ``loss`` keyed by ``id`` of every reachable node.

    Raises :class:`NumericalError` naming the first node whose value or
    gradient is non-finite.
    """
    if loss.size != 1:
        raise ValueError(f"backward needs a scalar, got shape {loss.shape}")
    order = _topological(loss)
    for node in order:
        if not np.all(np.isfinite(node.data)):
            raise NumericalError(f"non-finite value at node {node!r}", node=node)
    grads: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
    for node in reversed(order):
        g = grads.get(id(node))
        if g is None or node.backward_fn is None:
            continue
        for parent, pg in zip(node.parents, node.backward_fn(g)):
            if not parent.requires_grad:
                continue
            if not np.all(np.isfinite(pg)):
                raise NumericalError(f"non-finite gradient flowing from {node!r} into {parent!r}",
                                     node=node)
            key = id(parent)
            if key in grads:
                grads[key] = grads[key] + pg
            else:
                grads[key] = pg
    return grads


def grad(loss: Tensor, leaves: Mapping[str, Tensor]) -> dict[str, np.ndarray]:
    """Exact gradients of ``loss`` with respect to each named leaf."""
    if loss.requires_grad:
        g = backward(loss)
    elif not np.all(np.isfinite(loss.data)):
        raise NumericalError(f"loss is not finite: {loss.data}", node=loss)
    else:
        g = {}
    return {name: np.array(g.get(id(t), np.zeros_like(t.data)), dtype=DTYPE)
            for name, t in leaves.items()}
