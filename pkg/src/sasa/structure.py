"""Intra- and inter-variable sparse attention over a segment bank.

All functions accept an optional leading batch axis: a bank is ``(M, N, d)``
for one sample or ``(B, M, N, d)`` for a batch.

The inter-variable weights for target variable ``i`` are laid out as
``M - 1`` blocks of length N, one per other variable ``j`` in increasing
order (``i`` itself skipped), and lag ``tau`` inside each block.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import diffnum as dn
from .diffnum import Tensor


@dataclass
class ProjectionParams:
    """Query/key/value projections shared by every variable."""

    w_q: Tensor
    w_k: Tensor
    w_v: Tensor

    def tensors(self) -> dict[str, Tensor]:
        return {"proj.w_q": self.w_q, "proj.w_k": self.w_k, "proj.w_v": self.w_v}


def init_projections(d_h: int, rng: np.random.Generator) -> ProjectionParams:
    bound = 1.0 / np.sqrt(d_h)
    mats = [Tensor(rng.uniform(-bound, bound, size=(d_h, d_h)), True) for _ in range(3)]
    return ProjectionParams(*mats)


@lru_cache(maxsize=None)
def offdiag_index(M: int, N: int) -> tuple[np.ndarray, np.ndarray]:
    """Row/column indices selecting the ``(M-1)*N`` foreign entries of each row
    of an ``(M, M*N)`` score matrix."""
    width = (M - 1) * N
    rows = np.repeat(np.arange(M), width).reshape(M, width)
    cols = np.zeros((M, width), dtype=np.intp)
    for i in range(M):
        others = [j for j in range(M) if j != i]
        if others:
            cols[i] = (np.asarray(others)[:, None] * N + np.arange(N)).ravel()
    return rows, cols


def beta_position(i: int, j: int, tau: int, N: int) -> int:
    """Flat position of ``beta[i][j][tau]`` (``tau`` is 1-indexed) in row ``i``."""
    if i == j:
        raise ValueError("beta has no self block")
    block = j if j < i else j - 1
    return block * N + (tau - 1)


def intra_attention(bank: Tensor, proj: ProjectionParams) -> tuple[Tensor, Tensor]:
    """Segment-length weights ``alpha`` (..., M, N) and pooled representation ``Z`` (..., M, d).

    ``u_tau`` is the key-averaged scaled query-key score of segment ``tau``;
    ``alpha = sparsemax(u)`` and ``Z = sum_tau alpha_tau * (h_tau W_V)``.
    """
    *lead, M, N, d = bank.shape
    lead = tuple(lead)
    q = dn.matmul(bank, proj.w_q)
    k = dn.matmul(bank, proj.w_k)
    v = dn.matmul(bank, proj.w_v)
    scores = dn.scale(dn.matmul(q, dn.swapaxes(k, -1, -2)), 1.0 / np.sqrt(d))
    u = dn.mean(scores, axis=-1)
    alpha = dn.sparsemax(u)
    z = dn.matmul(dn.reshape(alpha, lead + (M, 1, N)), v)
    return alpha, dn.reshape(z, lead + (M, d))


def inter_attention(z: Tensor, bank: Tensor, lag_aware: bool = True) -> tuple[Tensor, Tensor]:
    """Associative weights ``beta`` and structure representation ``U``.

    With ``lag_aware`` (the default) each score is the cosine between ``Z^i``
    and a segment representation ``h^j_tau``, and sparsemax runs jointly over
    all ``(M-1)*N`` candidates of row ``i``. ``U^i = sum_{j != i, tau} beta^{ij}_tau h^j_tau``.

    The plain variant scores ``cos(Z^i, Z^j)`` once per pair; its beta rows
    then have ``M - 1`` entries and ``U^i = sum_j beta^{ij} Z^j``.
    """
    *lead, M, N, d = bank.shape
    lead = tuple(lead)
    if M == 1:
        width = 0
        return Tensor(np.zeros(lead + (1, width))), Tensor(np.zeros(lead + (1, d)))
    if not lag_aware:
        return _inter_attention_plain(z, lead, M, d)
    rows, cols = offdiag_index(M, N)
    zi = dn.expand(dn.reshape(z, lead + (M, 1, 1, d)), lead + (M, M, N, d))
    hj = dn.expand(dn.reshape(bank, lead + (1, M, N, d)), lead + (M, M, N, d))
    e_full = dn.reshape(dn.cosine(zi, hj), lead + (M, M * N))
    index = (Ellipsis, rows, cols)
    e = dn.take(e_full, index, unique=True)
    beta = dn.sparsemax(e)
    beta_full = dn.put(beta, index, lead + (M, M * N))
    u = dn.matmul(beta_full, dn.reshape(bank, lead + (M * N, d)))
    return beta, u


def _inter_attention_plain(z: Tensor, lead: tuple, M: int, d: int) -> tuple[Tensor, Tensor]:
    rows, cols = offdiag_index(M, 1)
    zi = dn.expand(dn.reshape(z, lead + (M, 1, d)), lead + (M, M, d))
    zj = dn.expand(dn.reshape(z, lead + (1, M, d)), lead + (M, M, d))
    index = (Ellipsis, rows, cols)
    beta = dn.sparsemax(dn.take(dn.cosine(zi, zj), index, unique=True))
    u = dn.matmul(dn.put(beta, index, lead + (M, M)), z)
    return beta, u


def build_representation(z: Tensor, u: Tensor) -> tuple[Tensor, Tensor]:
    """``H^i = [Z^i; U^i]`` as (..., M, 2d), plus the flattened (..., 2Md) vector."""
    if z.shape != u.shape:
        raise ValueError(f"Z and U shapes differ: {z.shape} vs {u.shape}")
    h = dn.concat([z, u], axis=-1)
    *lead, M, two_d = h.shape
    return h, dn.reshape(h, tuple(lead) + (M * two_d,))


def aggregate_structure(beta, M: int, N: int) -> np.ndarray:
    """Collapse lags: ``A[i][j] = sum_tau beta^{ij}_tau`` with a zero diagonal.

    ``beta`` is an array (or Tensor) of shape (..., M, (M-1)*N); for the plain
    variant pass ``N=1``.
    """
    b = beta.values if isinstance(beta, Tensor) else np.asarray(beta, dtype=np.float64)
    lead = b.shape[:-2]
    A = np.zeros(lead + (M, M))
    if M == 1:
        return A
    blocks = b.reshape(lead + (M, M - 1, N)).sum(axis=-1)
    for i in range(M):
        others = [j for j in range(M) if j != i]
        A[..., i, others] = blocks[..., i, :]
    return A
