"""Structure alignment losses between a source and a target mini-batch.

Both losses are the linear-kernel MMD: for every variable, the distance
between the batch-mean weight vectors of the two domains, summed over
variables.
"""

from __future__ import annotations

from . import diffnum as dn
from .diffnum import Tensor


def _mean_discrepancy(src: Tensor, tgt: Tensor, norm: str) -> Tensor:
    # src: (B_s, M, K), tgt: (B_t, M, K)
    if src.ndim != 3 or tgt.ndim != 3:
        raise ValueError(f"expected (batch, M, K) weights, got {src.shape} and {tgt.shape}")
    if src.shape[0] == 0 or tgt.shape[0] == 0:
        raise ValueError("alignment needs non-empty batches")
    if src.shape[1:] != tgt.shape[1:]:
        raise ValueError(f"source and target weights differ in shape: {src.shape[1:]} vs {tgt.shape[1:]}")
    M, K = src.shape[1:]
    if K == 0:
        return Tensor(0.0)
    diff = dn.sub(dn.mean(src, axis=0), dn.mean(tgt, axis=0))
    sq = dn.sum(dn.mul(diff, diff), axis=-1)
    if norm == "l2":
        per_var = dn.sqrt(sq)
    elif norm == "squared_l2":
        per_var = sq
    else:
        raise ValueError(f"unknown alignment norm {norm!r}")
    return dn.sum(per_var)


def alpha_alignment_loss(src_alpha: Tensor, tgt_alpha: Tensor, norm: str = "l2") -> Tensor:
    """Segment-length alignment over (B, M, N) intra-variable weights."""
    return _mean_discrepancy(src_alpha, tgt_alpha, norm)


def beta_alignment_loss(src_beta: Tensor, tgt_beta: Tensor, norm: str = "l2") -> Tensor:
    """Associative-structure alignment over (B, M, (M-1)*N) inter-variable weights.

    A single variable has no structure, so M == 1 gives 0.
    """
    return _mean_discrepancy(src_beta, tgt_beta, norm)
