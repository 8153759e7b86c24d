from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .tensor import Tensor


@dataclass
class AdamState:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step_count: int = 0
    first_moment: dict[str, np.ndarray] = field(default_factory=dict)
    second_moment: dict[str, np.ndarray] = field(default_factory=dict)


def adam_step(params: Mapping[str, Tensor], state: AdamState) -> AdamState:
    """Apply one bias-corrected Adam update using each parameter's ``grad``.

    Parameters are updated in place and their gradients are zeroed.
    """
    state.step_count += 1
    t = state.step_count
    bc1 = 1.0 - state.beta1 ** t
    bc2 = 1.0 - state.beta2 ** t
    for name, p in params.items():
        g = p.grad
        m = state.first_moment.get(name)
        if m is None:
            m = state.first_moment[name] = np.zeros_like(p.values)
            state.second_moment[name] = np.zeros_like(p.values)
        v = state.second_moment[name]
        if m.shape != p.values.shape:
            raise ValueError(f"moment shape {m.shape} does not match parameter {name!r} {p.values.shape}")
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * (g * g)
        p.values -= state.lr * (m / bc1) / (np.sqrt(v / bc2) + state.eps)
        p.zero_grad()
    return state
