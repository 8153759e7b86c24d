"""The op vocabulary. Every op returns a new :class:`Tensor` and registers a
vector-Jacobian product on the tape.

Elementwise binary ops require equal shapes; broadcasting is only available
explicitly through :func:`expand` (and over the batch axes of :func:`matmul`).
"""

from __future__ import annotations

from typing import Optional, Sequence

import numpy as np
from scipy.special import expit

from .sparsemax import sparsemax_backward, sparsemax_forward
from .tensor import Tensor, as_tensor

COSINE_EPS = 1e-8


def _same_shape(a: Tensor, b: Tensor, op: str) -> None:
    if a.shape != b.shape:
        raise ValueError(f"{op}: shape mismatch {a.shape} vs {b.shape}")


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum ``g`` down to ``shape`` (inverse of numpy broadcasting)."""
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g


# ---------------------------------------------------------------------------
# linear algebra

def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix product over the last two axes; leading axes follow numpy rules."""
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim < 2 or b.ndim < 2:
        raise ValueError(f"matmul needs operands with ndim >= 2, got {a.shape} and {b.shape}")
    if a.shape[-1] != b.shape[-2]:
        raise ValueError(f"matmul: inner dimensions differ, {a.shape} @ {b.shape}")
    av, bv = a.values, b.values
    out = np.matmul(av, bv)

    def back(g):
        if b.ndim == 2:
            ga = g @ bv.T
            gb = av.reshape(-1, av.shape[-1]).T @ g.reshape(-1, g.shape[-1])
        else:
            ga = _unbroadcast(np.matmul(g, np.swapaxes(bv, -1, -2)), av.shape)
            gb = _unbroadcast(np.matmul(np.swapaxes(av, -1, -2), g), bv.shape)
        return ga, gb

    return Tensor.from_op(out, (a, b), back, "matmul")


# ---------------------------------------------------------------------------
# elementwise

def elementwise(kind: str, *inputs, factor: Optional[float] = None) -> Tensor:
    """Dispatch ``add | sub | mul | scale | sigmoid | tanh | log | sqrt``."""
    table = {"add": add, "sub": sub, "mul": mul, "sigmoid": sigmoid, "tanh": tanh, "log": log, "sqrt": sqrt}
    if kind == "scale":
        return scale(inputs[0], factor if factor is not None else inputs[1])
    if kind not in table:
        raise ValueError(f"unknown elementwise kind {kind!r}")
    return table[kind](*inputs)


def add(a: Tensor, b: Tensor) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _same_shape(a, b, "add")
    return Tensor.from_op(a.values + b.values, (a, b), lambda g: (g, g), "add")


def sub(a: Tensor, b: Tensor) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _same_shape(a, b, "sub")
    return Tensor.from_op(a.values - b.values, (a, b), lambda g: (g, -g), "sub")


def mul(a: Tensor, b: Tensor) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _same_shape(a, b, "mul")
    av, bv = a.values, b.values
    return Tensor.from_op(av * bv, (a, b), lambda g: (g * bv, g * av), "mul")


def scale(a: Tensor, c: float) -> Tensor:
    a = as_tensor(a)
    c = float(c)
    return Tensor.from_op(a.values * c, (a,), lambda g: (g * c,), "scale")


def sigmoid(a: Tensor) -> Tensor:
    a = as_tensor(a)
    s = expit(a.values)
    return Tensor.from_op(s, (a,), lambda g: (g * s * (1.0 - s),), "sigmoid")


def tanh(a: Tensor) -> Tensor:
    a = as_tensor(a)
    t = np.tanh(a.values)
    return Tensor.from_op(t, (a,), lambda g: (g * (1.0 - t * t),), "tanh")


def log(a: Tensor) -> Tensor:
    a = as_tensor(a)
    if (a.values <= 0).any():
        raise ValueError("log of a non-positive value")
    av = a.values
    return Tensor.from_op(np.log(av), (a,), lambda g: (g / av,), "log")


def sqrt(a: Tensor) -> Tensor:
    """Square root whose derivative at exactly 0 is taken as 0 (subgradient)."""
    a = as_tensor(a)
    if (a.values < 0).any():
        raise ValueError("sqrt of a negative value")
    r = np.sqrt(a.values)

    def back(g):
        safe = np.where(r > 0, r, 1.0)
        return (np.where(r > 0, g * 0.5 / safe, 0.0),)

    return Tensor.from_op(r, (a,), back, "sqrt")


def clip(a: Tensor, lo: float, hi: float) -> Tensor:
    a = as_tensor(a)
    av = a.values
    inside = (av >= lo) & (av <= hi)
    return Tensor.from_op(np.clip(av, lo, hi), (a,), lambda g: (np.where(inside, g, 0.0),), "clip")


# ---------------------------------------------------------------------------
# reductions and shape plumbing

def reduce(kind: str, t: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    """``sum`` or ``mean`` over ``axis`` (``None`` reduces everything)."""
    t = as_tensor(t)
    if kind not in ("sum", "mean"):
        raise ValueError(f"unknown reduction {kind!r}")
    axes = tuple(range(t.ndim)) if axis is None else tuple(np.atleast_1d(axis).tolist())
    axes = tuple(ax % t.ndim for ax in axes) if t.ndim else ()
    count = int(np.prod([t.shape[ax] for ax in axes])) if axes else 1
    if count == 0:
        raise ValueError(f"{kind} over an empty axis")
    fn = np.sum if kind == "sum" else np.mean
    out = fn(t.values, axis=axes, keepdims=keepdims)
    factor = 1.0 if kind == "sum" else 1.0 / count
    shape = t.shape

    def back(g):
        if not keepdims:
            g = np.expand_dims(g, axes)
        return (np.broadcast_to(g * factor, shape),)

    return Tensor.from_op(out, (t,), back, kind)


def sum(t: Tensor, axis=None, keepdims: bool = False) -> Tensor:  # noqa: A001
    return reduce("sum", t, axis, keepdims)


def mean(t: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    return reduce("mean", t, axis, keepdims)


def reshape(t: Tensor, shape: Sequence[int]) -> Tensor:
    t = as_tensor(t)
    src = t.shape
    return Tensor.from_op(t.values.reshape(shape), (t,), lambda g: (g.reshape(src),), "reshape")


def swapaxes(t: Tensor, a1: int, a2: int) -> Tensor:
    t = as_tensor(t)
    return Tensor.from_op(np.swapaxes(t.values, a1, a2), (t,), lambda g: (np.swapaxes(g, a1, a2),), "swapaxes")


def expand(t: Tensor, shape: Sequence[int]) -> Tensor:
    """Explicit numpy-style broadcast to ``shape``; the gradient is summed back."""
    t = as_tensor(t)
    src = t.shape
    out = np.broadcast_to(t.values, tuple(shape))
    return Tensor.from_op(out, (t,), lambda g: (_unbroadcast(g, src),), "expand")


def concat(tensors: Sequence[Tensor], axis: int = -1) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    vals = [t.values for t in tensors]
    out = np.concatenate(vals, axis=axis)
    bounds = np.cumsum([v.shape[axis] for v in vals])[:-1]

    def back(g):
        return tuple(np.split(g, bounds, axis=axis))

    return Tensor.from_op(out, tensors, back, "concat")


def _is_basic(index) -> bool:
    items = index if isinstance(index, tuple) else (index,)
    return all(isinstance(i, (int, np.integer, slice)) or i is None or i is Ellipsis for i in items)


def take(t: Tensor, index, unique: bool = False) -> Tensor:
    """``t[index]``. Pass ``unique=True`` when a fancy index never repeats an element."""
    t = as_tensor(t)
    out = t.values[index]
    shape = t.shape
    direct = unique or _is_basic(index)

    def back(g):
        full = np.zeros(shape)
        if direct:
            full[index] = g
        else:
            np.add.at(full, index, g)
        return (full,)

    return Tensor.from_op(np.array(out), (t,), back, "take")


def put(t: Tensor, index, shape: Sequence[int]) -> Tensor:
    """Scatter ``t`` into zeros of ``shape`` at ``index`` (positions must be distinct)."""
    t = as_tensor(t)
    full = np.zeros(tuple(shape))
    full[index] = t.values
    return Tensor.from_op(full, (t,), lambda g: (g[index],), "put")


# ---------------------------------------------------------------------------
# the two ops with structure

def cosine(u: Tensor, v: Tensor, eps: float = COSINE_EPS) -> Tensor:
    """Cosine similarity along the last axis: ``u.v / (max(|u|,eps) max(|v|,eps))``."""
    u, v = as_tensor(u), as_tensor(v)
    _same_shape(u, v, "cosine")
    if u.ndim == 0 or u.shape[-1] < 1:
        raise ValueError("cosine needs vectors of length >= 1")
    uv, vv = u.values, v.values
    nu_raw = np.sqrt(np.sum(uv * uv, axis=-1))
    nv_raw = np.sqrt(np.sum(vv * vv, axis=-1))
    nu = np.maximum(nu_raw, eps)
    nv = np.maximum(nv_raw, eps)
    dot = np.sum(uv * vv, axis=-1)
    c = dot / (nu * nv)

    def back(g):
        # the norm only depends on its argument where it exceeds eps
        du_norm = np.where(nu_raw > eps, c / (nu * nu), 0.0)
        dv_norm = np.where(nv_raw > eps, c / (nv * nv), 0.0)
        inv = 1.0 / (nu * nv)
        gu = g[..., None] * (vv * inv[..., None] - uv * du_norm[..., None])
        gv = g[..., None] * (uv * inv[..., None] - vv * dv_norm[..., None])
        return gu, gv

    return Tensor.from_op(c, (u, v), back, "cosine")


def sparsemax(z: Tensor) -> Tensor:
    """Sparsemax over the last axis."""
    z = as_tensor(z)
    p = sparsemax_forward(z.values)
    return Tensor.from_op(p, (z,), lambda g: (sparsemax_backward(p, g),), "sparsemax")
