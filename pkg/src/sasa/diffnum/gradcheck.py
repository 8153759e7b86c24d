from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from .tensor import NonFiniteError, Tensor, backward

REL_FLOOR = 1e-8


def analytic_grads(f: Callable[[], Tensor], params: Sequence[Tensor]) -> list[np.ndarray]:
    for p in params:
        p.zero_grad()
    backward(f())
    grads = [p.grad.copy() for p in params]
    for p in params:
        p.zero_grad()
    return grads


def numeric_grads(f: Callable[[], Tensor], params: Sequence[Tensor], h: float = 1e-6) -> list[np.ndarray]:
    """Central differences, perturbing each coordinate of each leaf in place."""
    out = []
    for p in params:
        flat = p.values.reshape(-1)
        g = np.zeros_like(flat)
        for k in range(flat.size):
            orig = flat[k]
            flat[k] = orig + h
            fp = f().item()
            flat[k] = orig - h
            fm = f().item()
            flat[k] = orig
            if not (np.isfinite(fp) and np.isfinite(fm)):
                raise NonFiniteError("objective is not finite near the check point")
            g[k] = (fp - fm) / (2.0 * h)
        out.append(g.reshape(p.shape))
    return out


def grad_check(f: Callable[[], Tensor], params: Sequence[Tensor], h: float = 1e-6) -> float:
    """Max over coordinates of ``|analytic - numeric| / (|numeric| + 1e-8)``.

    ``f`` is re-evaluated from the current parameter values on every call, so it
    must rebuild its tape each time.
    """
    params = list(params)
    ana = analytic_grads(f, params)
    num = numeric_grads(f, params, h)
    worst = 0.0
    for a, n in zip(ana, num):
        if a.size:
            worst = max(worst, float(np.max(np.abs(a - n) / (np.abs(n) + REL_FLOOR))))
    return worst
