"""Tape-based reverse-mode tensors.

A :class:`Tensor` wraps a float64 ndarray. Tensors produced by an op keep a
reference to their parents and a closure mapping the output gradient to one
gradient per parent; :func:`backward` walks that graph in reverse topological
order.
"""

from __future__ import annotations

import contextlib
import itertools
from typing import Callable, Iterator, Optional, Sequence

import numpy as np

BackwardFn = Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]

_tape_ids = itertools.count(1)
_grad_enabled = True


class NonFiniteError(FloatingPointError):
    """Raised when a value or gradient contains NaN or Inf."""


def _check_finite(arr: np.ndarray, what: str, op: Optional[str]) -> None:
    if not np.isfinite(arr).all():
        where = f" in op {op!r}" if op else ""
        raise NonFiniteError(f"non-finite {what}{where}")


@contextlib.contextmanager
def no_grad() -> Iterator[None]:
    """Evaluate ops without recording them on the tape."""
    global _grad_enabled
    prev = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = prev


def is_grad_enabled() -> bool:
    return _grad_enabled


class Tensor:
    """Dense double-precision array that can take part in reverse-mode AD.

    Leaves are created directly; non-leaves come from :meth:`from_op`.
    ``grad`` is allocated lazily but always reads as a same-shape array.
    """

    __slots__ = ("values", "requires_grad", "op", "tape_id", "_grad", "_parents", "_backward", "name")

    def __init__(self, values, requires_grad: bool = False, name: Optional[str] = None):
        arr = np.array(values, dtype=np.float64)
        _check_finite(arr, "values", None)
        self.values = arr
        self.requires_grad = requires_grad
        self.op: Optional[str] = None
        self.tape_id: Optional[int] = None
        self._grad: Optional[np.ndarray] = None
        self._parents: tuple[Tensor, ...] = ()
        self._backward: Optional[BackwardFn] = None
        self.name = name

    @classmethod
    def from_op(cls, values: np.ndarray, parents: Sequence["Tensor"], backward: BackwardFn, op: str) -> "Tensor":
        """Wrap the result of an op, recording it on the tape when needed."""
        out = cls.__new__(cls)
        values = np.asarray(values, dtype=np.float64)
        _check_finite(values, "values", op)
        out.values = values
        out.op = op
        out._grad = None
        out.name = None
        needs = _grad_enabled and any(p.requires_grad for p in parents)
        out.requires_grad = needs
        if needs:
            out.tape_id = next(_tape_ids)
            out._parents = tuple(parents)
            out._backward = backward
        else:
            out.tape_id = None
            out._parents = ()
            out._backward = None
        return out

    # -- array-ish surface -------------------------------------------------
    @property
    def shape(self) -> tuple[int, ...]:
        return self.values.shape

    @property
    def ndim(self) -> int:
        return self.values.ndim

    @property
    def size(self) -> int:
        return self.values.size

    @property
    def is_leaf(self) -> bool:
        return self._backward is None

    @property
    def grad(self) -> np.ndarray:
        if self._grad is None:
            self._grad = np.zeros_like(self.values)
        return self._grad

    @grad.setter
    def grad(self, value) -> None:
        g = np.array(value, dtype=np.float64)
        if g.shape != self.values.shape:
            raise ValueError(f"grad shape {g.shape} does not match tensor shape {self.values.shape}")
        self._grad = g

    def zero_grad(self) -> None:
        self._grad = None

    def item(self) -> float:
        if self.values.size != 1:
            raise ValueError(f"item() on tensor of shape {self.shape}")
        return float(self.values.reshape(()))

    def numpy(self) -> np.ndarray:
        return self.values

    def detach(self) -> "Tensor":
        return Tensor(self.values)

    def _accumulate(self, g: np.ndarray) -> None:
        _check_finite(g, "gradient", self.op)
        if self._grad is None:
            self._grad = np.array(g, dtype=np.float64, copy=True).reshape(self.values.shape)
        else:
            self._grad += g

    def __repr__(self) -> str:
        tag = f", op={self.op}" if self.op else ""
        return f"Tensor(shape={self.shape}{tag})"

    # -- operator sugar; the implementations live in ops -----------------
    def __add__(self, other):
        from . import ops
        return ops.add(self, other)

    def __sub__(self, other):
        from . import ops
        return ops.sub(self, other)

    def __mul__(self, other):
        from . import ops
        if isinstance(other, Tensor):
            return ops.mul(self, other)
        return ops.scale(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        from . import ops
        if isinstance(other, Tensor):
            raise TypeError("tensor / tensor is not supported; use mul with a reciprocal")
        return ops.scale(self, 1.0 / other)

    def __neg__(self):
        from . import ops
        return ops.scale(self, -1.0)

    def __matmul__(self, other):
        from . import ops
        return ops.matmul(self, other)

    def __getitem__(self, index):
        from . import ops
        return ops.take(self, index)

    def sum(self, axis=None, keepdims: bool = False):
        from . import ops
        return ops.reduce("sum", self, axis, keepdims)

    def mean(self, axis=None, keepdims: bool = False):
        from . import ops
        return ops.reduce("mean", self, axis, keepdims)

    def reshape(self, *shape):
        from . import ops
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return ops.reshape(self, shape)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _topological_order(root: Tensor) -> list[Tensor]:
    order: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for parent in node._parents:
            if id(parent) not in seen:
                stack.append((parent, False))
    return order


def backward(loss: Tensor) -> None:
    """Accumulate d(loss)/d(leaf) into every reachable leaf's ``grad``.

    Intermediate gradients are recomputed from scratch on every call; leaf
    gradients accumulate across calls until zeroed.
    """
    if loss.values.size != 1:
        raise ValueError(f"backward() needs a scalar loss, got shape {loss.shape}")
    order = _topological_order(loss)
    for node in order:
        if not node.is_leaf:
            node._grad = None
    if loss.is_leaf:
        loss._accumulate(np.ones_like(loss.values))
    else:
        loss._grad = np.ones_like(loss.values)
    for node in reversed(order):
        if node.is_leaf or node._grad is None:
            continue
        grads = node._backward(node._grad)
        for parent, g in zip(node._parents, grads):
            if g is None or not parent.requires_grad:
                continue
            parent._accumulate(g)
