"""Suffix-segment enumeration and per-variable LSTM summarization.

For a series of length N, segment ``tau`` (1-indexed) is the window of the
last ``tau`` values. Every variable owns an LSTM; each of its N segments is
run from a zero state, which makes the bank an O(N^2) computation per
variable. :func:`summarize` evaluates all windows in one fused kernel: all
windows end at the last step, so at time ``t`` exactly the windows that have
already started (a contiguous block) are advanced.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.special import expit

from . import diffnum as dn
from .diffnum import Tensor


@dataclass
class TimeSeriesSample:
    series: np.ndarray
    label: Optional[float] = None
    domain: str = "source"
    id: str = ""

    def __post_init__(self):
        self.series = np.array(self.series, dtype=np.float64)
        if self.series.ndim != 2 or min(self.series.shape) < 1:
            raise ValueError(f"series must be an M x N matrix with M, N >= 1, got shape {self.series.shape}")
        if not np.isfinite(self.series).all():
            raise ValueError(f"sample {self.id!r} has non-finite values")
        if self.domain not in ("source", "target"):
            raise ValueError(f"unknown domain {self.domain!r}")

    @property
    def M(self) -> int:
        return self.series.shape[0]

    @property
    def N(self) -> int:
        return self.series.shape[1]


@dataclass
class LSTMCellParams:
    """One LSTM cell; gate blocks are ordered input, forget, candidate, output."""

    w_x: Tensor  # (input_size, 4d)
    w_h: Tensor  # (d, 4d)
    b: Tensor  # (4d,)

    @property
    def hidden(self) -> int:
        return self.w_h.shape[0]


@dataclass
class VarLSTMParams:
    """M independent single-input LSTMs stacked on a leading variable axis."""

    w_x: Tensor  # (M, 4d)
    w_h: Tensor  # (M, d, 4d)
    b: Tensor  # (M, 4d)

    @property
    def M(self) -> int:
        return self.w_h.shape[0]

    @property
    def hidden(self) -> int:
        return self.w_h.shape[1]

    def block(self, i: int) -> LSTMCellParams:
        """Differentiable view of variable ``i``'s cell."""
        return LSTMCellParams(
            w_x=dn.reshape(self.w_x[i], (1, -1)),
            w_h=self.w_h[i],
            b=self.b[i],
        )

    def tensors(self) -> dict[str, Tensor]:
        return {"lstm.w_x": self.w_x, "lstm.w_h": self.w_h, "lstm.b": self.b}


def init_var_lstm(M: int, d_h: int, rng: np.random.Generator, forget_bias: float = 1.0) -> VarLSTMParams:
    bound = 1.0 / np.sqrt(d_h)
    w_x = rng.uniform(-bound, bound, size=(M, 4 * d_h))
    w_h = rng.uniform(-bound, bound, size=(M, d_h, 4 * d_h))
    b = rng.uniform(-bound, bound, size=(M, 4 * d_h))
    b[:, d_h:2 * d_h] = forget_bias
    return VarLSTMParams(Tensor(w_x, True), Tensor(w_h, True), Tensor(b, True))


def init_lstm_cell(input_size: int, d_h: int, rng: np.random.Generator, forget_bias: float = 1.0) -> LSTMCellParams:
    bound = 1.0 / np.sqrt(d_h)
    w_x = rng.uniform(-bound, bound, size=(input_size, 4 * d_h))
    w_h = rng.uniform(-bound, bound, size=(d_h, 4 * d_h))
    b = rng.uniform(-bound, bound, size=4 * d_h)
    b[d_h:2 * d_h] = forget_bias
    return LSTMCellParams(Tensor(w_x, True), Tensor(w_h, True), Tensor(b, True))


def enumerate_segments(x: Sequence[float]) -> list[np.ndarray]:
    """All N suffix windows of ``x``, shortest first."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.size == 0:
        raise ValueError("enumerate_segments needs a non-empty 1-D series")
    N = x.size
    return [x[N - tau:] for tau in range(1, N + 1)]


def lstm_step(x_t, state: tuple[Tensor, Tensor], cell: LSTMCellParams) -> tuple[Tensor, Tensor]:
    """One LSTM recurrence built from tape ops.

    ``x_t`` is ``(B, input_size)`` (a bare scalar is accepted for single-input
    cells); ``state`` is ``(h, c)`` with shapes ``(B, d)``.
    """
    h, c = state
    x_t = dn.as_tensor(x_t)
    if x_t.ndim == 0:
        x_t = dn.reshape(x_t, (1, 1))
    d = cell.hidden
    B = h.shape[0]
    a = dn.add(dn.matmul(x_t, cell.w_x), dn.matmul(h, cell.w_h))
    a = dn.add(a, dn.expand(cell.b, (B, 4 * d)))
    i = dn.sigmoid(a[:, 0:d])
    f = dn.sigmoid(a[:, d:2 * d])
    g = dn.tanh(a[:, 2 * d:3 * d])
    o = dn.sigmoid(a[:, 3 * d:4 * d])
    c_new = dn.add(dn.mul(f, c), dn.mul(i, g))
    h_new = dn.mul(o, dn.tanh(c_new))
    return h_new, c_new


def zero_state(batch: int, d_h: int) -> tuple[Tensor, Tensor]:
    return Tensor(np.zeros((batch, d_h))), Tensor(np.zeros((batch, d_h)))


def _suffix_lstm_forward(xs, w_x, w_h, b, keep_cache):
    # xs: (M, B, N). State arrays are (M, n_active, B, d); local window index
    # k started k steps ago, so after the last step k == tau - 1.
    M, B, N = xs.shape
    d = w_h.shape[1]
    cache = []
    bias = b[:, None, None, :]
    h_prev = c_prev = None
    for t in range(N):
        n = t + 1
        a = np.empty((M, n, B, 4 * d))
        a[:, 0] = 0.0
        if t:
            a[:, 1:] = np.matmul(h_prev.reshape(M, t * B, d), w_h).reshape(M, t, B, 4 * d)
        a += (xs[:, :, t, None] * w_x[:, None, :])[:, None, :, :]
        a += bias
        gates = expit(a)
        i = gates[..., 0:d]
        f = gates[..., d:2 * d]
        o = gates[..., 3 * d:]
        g = np.tanh(a[..., 2 * d:3 * d])
        c_new = i * g
        if t:
            c_new[:, 1:] += f[:, 1:] * c_prev
        tc = np.tanh(c_new)
        h_new = o * tc
        if keep_cache:
            cache.append((h_prev, c_prev, i, f, g, o, tc))
        h_prev, c_prev = h_new, c_new
    return h_prev, cache


def _suffix_lstm_backward(dbank, xs, w_x, w_h, cache):
    # dbank: (M, N, B, d) in the same local ordering as the final step.
    M, B, N = xs.shape
    d = w_h.shape[1]
    dh = np.array(dbank, dtype=np.float64, copy=True)
    dc = np.zeros_like(dh)
    dw_x = np.zeros_like(w_x)
    dw_h = np.zeros_like(w_h)
    db = np.zeros_like(w_x)
    w_h_t = np.swapaxes(w_h, 1, 2)
    for t in range(N - 1, -1, -1):
        h_prev, c_prev, i, f, g, o, tc = cache[t]
        dcn = dc + dh * o * (1.0 - tc * tc)
        df = np.zeros_like(dcn)
        if t:
            df[:, 1:] = dcn[:, 1:] * c_prev
        da = np.concatenate(
            [
                dcn * g * i * (1.0 - i),
                df * f * (1.0 - f),
                dcn * i * (1.0 - g * g),
                dh * tc * o * (1.0 - o),
            ],
            axis=-1,
        )
        dw_x += np.einsum("mbk,mb->mk", da.sum(axis=1), xs[:, :, t])
        db += da.sum(axis=(1, 2))
        if t:
            da_old = da[:, 1:].reshape(M, t * B, 4 * d)
            dw_h += np.matmul(np.swapaxes(h_prev.reshape(M, t * B, d), 1, 2), da_old)
            dh = np.matmul(da_old, w_h_t).reshape(M, t, B, d)
            dc = dcn[:, 1:] * f[:, 1:]
    return dw_x, dw_h, db


def summarize(x, params: VarLSTMParams) -> Tensor:
    """Segment bank for a sample ``(M, N)`` or batch ``(B, M, N)``.

    Returns ``(..., M, N, d_h)`` where index ``tau - 1`` on the N axis holds
    the final hidden state of the variable's LSTM run over its last ``tau``
    values from a zero state.
    """
    if isinstance(x, TimeSeriesSample):
        x = x.series
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 2
    if single:
        x = x[None]
    if x.ndim != 3:
        raise ValueError(f"expected (M, N) or (B, M, N) input, got shape {x.shape}")
    if x.shape[1] != params.M:
        raise ValueError(f"sample has {x.shape[1]} variables, parameters have {params.M}")
    if x.shape[2] < 1:
        raise ValueError("series must have at least one step")
    xs = np.ascontiguousarray(np.swapaxes(x, 0, 1))
    w_x, w_h, b = params.w_x, params.w_h, params.b
    track = dn.is_grad_enabled() and (w_x.requires_grad or w_h.requires_grad or b.requires_grad)
    h, cache = _suffix_lstm_forward(xs, w_x.values, w_h.values, b.values, track)
    bank = np.transpose(h, (2, 0, 1, 3))  # (M, N, B, d) -> (B, M, N, d)

    def back(g):
        return _suffix_lstm_backward(np.transpose(g, (1, 2, 0, 3)), xs, w_x.values, w_h.values, cache)

    out = Tensor.from_op(np.ascontiguousarray(bank), (w_x, w_h, b), back, "suffix_lstm")
    if single:
        out = out[0]
    return out
