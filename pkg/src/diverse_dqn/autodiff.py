"""Small reverse-mode autodiff over float64 numpy arrays.

Every op records a node carrying its inputs and a backward closure. Node ids
are handed out in creation order, so sorting the reachable nodes by id gives
a valid tape; ``backward`` walks it in exact reverse.
"""
from __future__ import annotations

import itertools
from typing import Callable, Iterable, Sequence

import numpy as np

_ids = itertools.count()


class ShapeError(ValueError):
    pass


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "_id", "name")

    def __init__(self, data, requires_grad: bool = False, name: str = ""):
        self.data = np.array(data, dtype=np.float64)
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self._parents: tuple[Tensor, ...] = ()
        self._backward: Callable[[np.ndarray], None] | None = None
        self._id = next(_ids)
        self.name = name

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, name={self.name!r})"

    def zero_grad(self) -> None:
        self.grad = None

    def item(self) -> float:
        return float(self.data)

    def _accumulate(self, g: np.ndarray) -> None:
        if self.grad is None:
            self.grad = np.array(g, dtype=np.float64, copy=True).reshape(self.data.shape)
        else:
            self.grad += g

    # operator sugar
    def __add__(self, other): return add(self, _lift(other))
    def __radd__(self, other): return add(_lift(other), self)
    def __sub__(self, other): return sub(self, _lift(other))
    def __rsub__(self, other): return sub(_lift(other), self)
    def __mul__(self, other): return mul(self, _lift(other))
    def __rmul__(self, other): return mul(_lift(other), self)
    def __neg__(self): return mul(self, Tensor(-1.0))
    def __matmul__(self, other): return matmul(self, other)


def _lift(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _node(data: np.ndarray, parents: tuple[Tensor, ...], backward, name: str) -> Tensor:
    out = Tensor.__new__(Tensor)
    out.data = data
    out.grad = None
    out.requires_grad = False
    out._parents = ()
    out._backward = None
    out._id = next(_ids)
    out.name = name
    if any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = parents
        out._backward = backward
    return out


def _check_finite(data: np.ndarray, op: str) -> np.ndarray:
    # one reduction; a finite array only sums to inf/nan near float overflow
    if not np.isfinite(data.sum()):
        raise FloatingPointError(f"{op} produced a non-finite value")
    return data


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.data.ndim != 2 or b.data.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul shapes {a.shape} and {b.shape} do not align")

    def backward(g):
        if a.requires_grad:
            a._accumulate(g @ b.data.T)
        if b.requires_grad:
            b._accumulate(a.data.T @ g)

    return _node(_check_finite(a.data @ b.data, "matmul"), (a, b), backward, "matmul")


def add(a: Tensor, b: Tensor) -> Tensor:
    try:
        data = a.data + b.data
    except ValueError as exc:
        raise ShapeError(str(exc)) from None

    def backward(g):
        if a.requires_grad:
            a._accumulate(_unbroadcast(g, a.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(g, b.shape))

    return _node(_check_finite(data, "add"), (a, b), backward, "add")


def sub(a: Tensor, b: Tensor) -> Tensor:
    try:
        data = a.data - b.data
    except ValueError as exc:
        raise ShapeError(str(exc)) from None

    def backward(g):
        if a.requires_grad:
            a._accumulate(_unbroadcast(g, a.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(-g, b.shape))

    return _node(_check_finite(data, "sub"), (a, b), backward, "sub")


def mul(a: Tensor, b: Tensor) -> Tensor:
    try:
        data = a.data * b.data
    except ValueError as exc:
        raise ShapeError(str(exc)) from None

    def backward(g):
        if a.requires_grad:
            a._accumulate(_unbroadcast(g * b.data, a.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(g * a.data, b.shape))

    return _node(_check_finite(data, "mul"), (a, b), backward, "mul")


def relu(x: Tensor) -> Tensor:
    # subgradient at exactly 0 is 0
    mask = x.data > 0

    def backward(g):
        x._accumulate(g * mask)

    return _node(np.where(mask, x.data, 0.0), (x,), backward, "relu")


def square(x: Tensor) -> Tensor:
    def backward(g):
        x._accumulate(2.0 * x.data * g)

    return _node(_check_finite(x.data * x.data, "square"), (x,), backward, "square")


def sqrt(x: Tensor) -> Tensor:
    if np.any(x.data <= 0):
        raise FloatingPointError("sqrt of a non-positive value")
    out_data = np.sqrt(x.data)

    def backward(g):
        x._accumulate(g * 0.5 / out_data)

    return _node(out_data, (x,), backward, "sqrt")


def tsum(x: Tensor) -> Tensor:
    def backward(g):
        x._accumulate(np.broadcast_to(g, x.shape))

    return _node(np.array(x.data.sum()), (x,), backward, "sum")


def mean(x: Tensor) -> Tensor:
    n = x.data.size

    def backward(g):
        x._accumulate(np.broadcast_to(g / n, x.shape))

    return _node(np.array(x.data.mean()), (x,), backward, "mean")


def pick(x: Tensor, index: Sequence[int]) -> Tensor:
    """Row-wise gather: ``out[r] = x[r, index[r]]`` for a 2-D ``x``."""
    idx = np.asarray(index, dtype=np.intp)
    if x.data.ndim != 2 or idx.shape != (x.shape[0],):
        raise ShapeError(f"pick needs a 2-D tensor and one index per row, got {x.shape}, {idx.shape}")
    rows = np.arange(x.shape[0])

    def backward(g):
        full = np.zeros(x.shape)
        full[rows, idx] = g
        x._accumulate(full)

    return _node(x.data[rows, idx], (x,), backward, "pick")


def squared_l2_norm(params: Iterable[Tensor]) -> Tensor:
    """Sum of squares over every entry of every tensor in ``params``."""
    params = tuple(params)
    if not params:
        raise ValueError("squared_l2_norm needs at least one parameter tensor")
    total = float(sum(np.dot(p.data.ravel(), p.data.ravel()) for p in params))

    def backward(g):
        for p in params:
            if p.requires_grad:
                p._accumulate(2.0 * g * p.data)

    return _node(np.array(total), params, backward, "squared_l2_norm")


def scalar_function(x: Tensor, value: float, derivative: float, name: str = "fn") -> Tensor:
    """Wrap an externally evaluated scalar map ``f(x)`` with known ``f'(x)``."""
    if x.data.size != 1:
        raise ShapeError("scalar_function expects a scalar input")

    def backward(g):
        x._accumulate(g * derivative)

    return _node(np.array(float(value)), (x,), backward, name)


def _tape(loss: Tensor) -> list[Tensor]:
    seen: set[int] = set()
    nodes: list[Tensor] = []
    stack = [loss]
    while stack:
        t = stack.pop()
        if t._id in seen:
            continue
        seen.add(t._id)
        nodes.append(t)
        stack.extend(t._parents)
    nodes.sort(key=lambda t: t._id)
    return nodes


def backward(loss: Tensor) -> None:
    """Accumulate d(loss)/d(leaf) into ``.grad`` of every reachable leaf."""
    if loss.data.size != 1:
        raise ShapeError(f"backward needs a scalar loss, got shape {loss.shape}")
    if not loss.requires_grad:
        return
    nodes = _tape(loss)
    interior = [t for t in nodes if t._backward is not None]
    for t in interior:
        t.grad = None
    loss.grad = np.ones_like(loss.data)
    for node in reversed(interior):
        if node.grad is not None:
            node._backward(node.grad)
    # only leaves keep gradients
    for t in interior:
        t.grad = None


class SGD:
    def __init__(self, params: Sequence[Tensor], lr: float):
        self.params = list(params)
        self.lr = lr

    def step(self, grads: Sequence[np.ndarray] | None = None) -> None:
        grads = _grads_for(self.params, grads)
        for p, g in zip(self.params, grads):
            p.data -= self.lr * g


class Adam:
    def __init__(self, params: Sequence[Tensor], lr: float = 1e-3,
                 betas: tuple[float, float] = (0.9, 0.999), eps: float = 1e-8):
        self.params = list(params)
        self.lr = lr
        self.beta1, self.beta2 = betas
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(p.data) for p in self.params]
        self.v = [np.zeros_like(p.data) for p in self.params]

    def step(self, grads: Sequence[np.ndarray] | None = None) -> None:
        grads = _grads_for(self.params, grads)
        self.t += 1
        c1 = 1.0 - self.beta1 ** self.t
        c2 = 1.0 - self.beta2 ** self.t
        step = self.lr / c1
        root_c2 = np.sqrt(c2)
        for p, g, m, v in zip(self.params, grads, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * (g * g)
            denom = np.sqrt(v)
            denom /= root_c2
            denom += self.eps
            p.data -= step * m / denom

    def state(self) -> dict:
        return {"t": self.t, "m": [m.copy() for m in self.m], "v": [v.copy() for v in self.v]}


def _grads_for(params: Sequence[Tensor], grads) -> list[np.ndarray]:
    if grads is None:
        grads = [p.grad if p.grad is not None else np.zeros_like(p.data) for p in params]
    if len(grads) != len(params):
        raise ShapeError("one gradient per parameter is required")
    for p, g in zip(params, grads):
        if np.shape(g) != p.shape:
            raise ShapeError(f"gradient shape {np.shape(g)} does not match parameter {p.shape}")
    return list(grads)


def clip_grad_norm(params: Sequence[Tensor], max_norm: float) -> float:
    """Rescale grads in place so their global L2 norm is at most ``max_norm``.

    Returns the norm before clipping. ``max_norm <= 0`` disables clipping.
    """
    grads = [p.grad for p in params if p.grad is not None]
    total = float(np.sqrt(sum(float(np.sum(g * g)) for g in grads)))
    if max_norm > 0 and total > max_norm:
        scale = max_norm / (total + 1e-6)
        for g in grads:
            g *= scale
    return total
