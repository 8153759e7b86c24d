"""Minimal reverse-mode differentiable numerics in double precision."""

from .gradcheck import analytic_grads, grad_check, numeric_grads
from .ops import (
    add,
    clip,
    concat,
    cosine,
    elementwise,
    expand,
    log,
    matmul,
    mean,
    mul,
    put,
    reduce,
    reshape,
    scale,
    sigmoid,
    sparsemax,
    sqrt,
    sub,
    sum,
    swapaxes,
    take,
    tanh,
)
from .optim import AdamState, adam_step
from .sparsemax import sparsemax_backward, sparsemax_forward
from .tensor import NonFiniteError, Tensor, as_tensor, backward, is_grad_enabled, no_grad

__all__ = [
    "AdamState",
    "NonFiniteError",
    "Tensor",
    "adam_step",
    "add",
    "analytic_grads",
    "as_tensor",
    "backward",
    "clip",
    "concat",
    "cosine",
    "elementwise",
    "expand",
    "grad_check",
    "is_grad_enabled",
    "log",
    "matmul",
    "mean",
    "mul",
    "no_grad",
    "numeric_grads",
    "put",
    "reduce",
    "reshape",
    "scale",
    "sigmoid",
    "sparsemax",
    "sparsemax_backward",
    "sparsemax_forward",
    "sqrt",
    "sub",
    "sum",
    "swapaxes",
    "take",
    "tanh",
]
