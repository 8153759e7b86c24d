"""Sparsemax: Euclidean projection onto the probability simplex.

Both functions act on the last axis and accept any number of leading
batch axes.
"""

import numpy as np


def sparsemax_forward(z: np.ndarray) -> np.ndarray:
    """Project each row of ``z`` onto the simplex with the sort-and-threshold rule.

    Rows are sorted descending (stable, so ties keep their original order);
    the support size is the largest ``k`` with ``1 + k * z_(k) > sum_{j<=k} z_(j)``
    and the threshold is ``tau = (sum_{j<=k} z_(j) - 1) / k``.
    """
    z = np.asarray(z, dtype=np.float64)
    if z.shape[-1] < 1:
        raise ValueError("sparsemax needs at least one entry per row")
    if not np.isfinite(z).all():
        raise ValueError("sparsemax input contains non-finite values")
    K = z.shape[-1]
    order = np.argsort(-z, axis=-1, kind="stable")
    z_sorted = np.take_along_axis(z, order, axis=-1)
    cumsum = np.cumsum(z_sorted, axis=-1)
    ks = np.arange(1, K + 1, dtype=np.float64)
    in_support = 1.0 + ks * z_sorted > cumsum
    # k(z) is the largest qualifying k; k=1 always qualifies.
    k_z = np.max(np.where(in_support, np.arange(1, K + 1), 0), axis=-1, keepdims=True)
    tau = (np.take_along_axis(cumsum, k_z - 1, axis=-1) - 1.0) / k_z
    return np.maximum(z - tau, 0.0)


def sparsemax_backward(p: np.ndarray, grad_out: np.ndarray) -> np.ndarray:
    """Vector-Jacobian product: ``(v_i - mean_S(v)) * [i in S]`` with ``S = {p_i > 0}``."""
    support = p > 0
    count = support.sum(axis=-1, keepdims=True)
    v_bar = np.where(support, grad_out, 0.0).sum(axis=-1, keepdims=True) / count
    return np.where(support, grad_out - v_bar, 0.0)
