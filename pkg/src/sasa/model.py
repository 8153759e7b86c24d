"""The end-to-end model, its objective and the training loop.

``forward`` chains segment summarization, intra- and inter-variable
attention, representation assembly and a one-hidden-layer predictor. The
objective is ``L_y + omega * (L_alpha + L_beta)`` with the alignment terms
computed between a labeled source batch and an unlabeled target batch.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import asdict, dataclass, field, fields
from typing import Optional

import numpy as np

from . import diffnum as dn
from .alignment import alpha_alignment_loss, beta_alignment_loss
from .datasets import Dataset
from .diffnum import AdamState, Tensor
from .metrics import task_metric
from .segmenter import LSTMCellParams, VarLSTMParams, init_lstm_cell, init_var_lstm, lstm_step, summarize, zero_state
from .structure import (
    ProjectionParams,
    aggregate_structure,
    build_representation,
    init_projections,
    inter_attention,
    intra_attention,
)

log = logging.getLogger(__name__)

ABLATIONS = ("full", "no_alpha", "no_beta", "source_only")
TASKS = ("classification", "regression")
NORMS = ("l2", "squared_l2")
ARCHITECTURES = ("sasa", "lstm")
PROB_CLAMP = 1e-7
PREDICT_CHUNK = 128


@dataclass
class ModelConfig:
    M: int
    N: int
    d_h: int = 16
    task: str = "classification"
    omega: float = 1.0
    lr: float = 1e-3
    batch_size: int = 32
    epochs: int = 10
    seed: int = 0
    ablation: str = "full"
    alignment_norm: str = "l2"
    lag_aware: bool = True
    architecture: str = "sasa"

    def __post_init__(self):
        for name in ("M", "N", "d_h", "batch_size"):
            if int(getattr(self, name)) < 1:
                raise ValueError(f"{name} must be a positive integer")
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if self.omega < 0:
            raise ValueError("omega must be >= 0")
        if self.lr <= 0:
            raise ValueError("lr must be positive")
        for name, allowed in (
            ("task", TASKS),
            ("ablation", ABLATIONS),
            ("alignment_norm", NORMS),
            ("architecture", ARCHITECTURES),
        ):
            if getattr(self, name) not in allowed:
                raise ValueError(f"{name} must be one of {allowed}, got {getattr(self, name)!r}")
        if self.architecture == "lstm" and self.ablation != "source_only":
            raise ValueError("the plain LSTM baseline only supports ablation 'source_only'")

    @property
    def uses_target(self) -> bool:
        return self.ablation != "source_only"

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown model config keys: {sorted(unknown)}")
        return cls(**d)


@dataclass
class PredictorParams:
    w1: Tensor
    b1: Tensor
    w2: Tensor
    b2: Tensor

    def tensors(self) -> dict[str, Tensor]:
        return {"pred.w1": self.w1, "pred.b1": self.b1, "pred.w2": self.w2, "pred.b2": self.b2}


def init_predictor(n_in: int, n_hidden: int, rng: np.random.Generator) -> PredictorParams:
    b_in = 1.0 / math.sqrt(n_in)
    b_h = 1.0 / math.sqrt(n_hidden)
    return PredictorParams(
        Tensor(rng.uniform(-b_in, b_in, size=(n_in, n_hidden)), True),
        Tensor(rng.uniform(-b_in, b_in, size=n_hidden), True),
        Tensor(rng.uniform(-b_h, b_h, size=(n_hidden, 1)), True),
        Tensor(rng.uniform(-b_h, b_h, size=1), True),
    )


@dataclass
class ModelParams:
    lstm: VarLSTMParams
    proj: ProjectionParams
    predictor: PredictorParams

    def tensors(self) -> dict[str, Tensor]:
        return {**self.lstm.tensors(), **self.proj.tensors(), **self.predictor.tensors()}


@dataclass
class BaselineParams:
    """A single LSTM over the whole multivariate series plus the same predictor head."""

    cell: LSTMCellParams
    predictor: PredictorParams

    def tensors(self) -> dict[str, Tensor]:
        return {
            "cell.w_x": self.cell.w_x,
            "cell.w_h": self.cell.w_h,
            "cell.b": self.cell.b,
            **self.predictor.tensors(),
        }


def init_params(config: ModelConfig, rng: Optional[np.random.Generator] = None):
    rng = rng if rng is not None else np.random.default_rng(config.seed)
    d = config.d_h
    if config.architecture == "lstm":
        return BaselineParams(init_lstm_cell(config.M, d, rng), init_predictor(d, d, rng))
    return ModelParams(
        init_var_lstm(config.M, d, rng),
        init_projections(d, rng),
        init_predictor(2 * config.M * d, d, rng),
    )


def count_params(params) -> int:
    return int(sum(t.size for t in params.tensors().values()))


def expected_param_count(M: int, d_h: int) -> int:
    """Closed form of :func:`count_params` for the full model (independent of N)."""
    lstm = M * (4 * d_h + 4 * d_h * d_h + 4 * d_h)
    proj = 3 * d_h * d_h
    pred = (2 * M * d_h * d_h + d_h) + (d_h + 1)
    return lstm + proj + pred


@dataclass
class ForwardResult:
    pred: Tensor  # (B,)
    alpha: Optional[Tensor] = None  # (B, M, N)
    beta: Optional[Tensor] = None  # (B, M, (M-1)N)
    H: Optional[Tensor] = None  # (B, M, 2d)


def _head(features: Tensor, head: PredictorParams, task: str) -> Tensor:
    B = features.shape[0]
    hidden = dn.tanh(dn.add(dn.matmul(features, head.w1), dn.expand(head.b1, (B, head.b1.shape[0]))))
    out = dn.add(dn.matmul(hidden, head.w2), dn.expand(head.b2, (B, 1)))
    out = dn.reshape(out, (B,))
    return dn.sigmoid(out) if task == "classification" else out


def forward(x, params, config: ModelConfig) -> ForwardResult:
    """Predictions and attention weights for a batch ``(B, M, N)``."""
    x = np.asarray(getattr(x, "series", x), dtype=np.float64)
    if x.ndim == 2:
        x = x[None]
    if x.shape[1:] != (config.M, config.N):
        raise ValueError(f"input has (M, N) = {x.shape[1:]}, model expects ({config.M}, {config.N})")
    if isinstance(params, BaselineParams):
        return _forward_baseline(x, params, config)
    bank = summarize(x, params.lstm)
    alpha, z = intra_attention(bank, params.proj)
    beta, u = inter_attention(z, bank, lag_aware=config.lag_aware)
    H, flat = build_representation(z, u)
    pred = _head(flat, params.predictor, config.task)
    return ForwardResult(pred, alpha, beta, H)


def _forward_baseline(x: np.ndarray, params: BaselineParams, config: ModelConfig) -> ForwardResult:
    B = x.shape[0]
    h, c = zero_state(B, config.d_h)
    for t in range(config.N):
        h, c = lstm_step(Tensor(x[:, :, t]), (h, c), params.cell)
    return ForwardResult(_head(h, params.predictor, config.task))


def label_loss(pred: Tensor, y, task: str) -> Tensor:
    """Mean binary cross-entropy (classification) or RMSE (regression)."""
    y = np.asarray(y, dtype=np.float64).reshape(pred.shape)
    if np.isnan(y).any():
        raise ValueError("label loss needs every label")
    if task == "classification":
        p = dn.clip(pred, PROB_CLAMP, 1.0 - PROB_CLAMP)
        one = Tensor(np.ones(pred.shape))
        yt = Tensor(y)
        ll = dn.add(dn.mul(yt, dn.log(p)), dn.mul(dn.sub(one, yt), dn.log(dn.sub(one, p))))
        return dn.scale(dn.mean(ll), -1.0)
    if task == "regression":
        diff = dn.sub(pred, Tensor(y))
        return dn.sqrt(dn.mean(dn.mul(diff, diff)))
    raise ValueError(f"unknown task {task!r}")


@dataclass
class LossTerms:
    total: Tensor
    label: Tensor
    alpha: Tensor
    beta: Tensor


def total_loss(src_x, src_y, tgt_x, params, config: ModelConfig) -> LossTerms:
    """Objective on one source/target batch pair; target labels are never seen."""
    src_x = np.asarray(src_x, dtype=np.float64)
    if src_x.shape[0] == 0:
        raise ValueError("empty source batch")
    zero = Tensor(0.0)
    if not config.uses_target:
        out = forward(src_x, params, config)
        l_y = label_loss(out.pred, src_y, config.task)
        return LossTerms(l_y, l_y, zero, zero)
    tgt_x = np.asarray(tgt_x, dtype=np.float64)
    if tgt_x.shape[0] == 0:
        raise ValueError("empty target batch")
    n_src = src_x.shape[0]
    out = forward(np.concatenate([src_x, tgt_x]), params, config)
    l_y = label_loss(out.pred[:n_src], src_y, config.task)
    l_a = alpha_alignment_loss(out.alpha[:n_src], out.alpha[n_src:], config.alignment_norm)
    l_b = beta_alignment_loss(out.beta[:n_src], out.beta[n_src:], config.alignment_norm)
    if config.ablation == "no_alpha":
        l_a = zero
    elif config.ablation == "no_beta":
        l_b = zero
    total = dn.add(l_y, dn.scale(dn.add(l_a, l_b), config.omega))
    return LossTerms(total, l_y, l_a, l_b)


# ---------------------------------------------------------------------------
# inference helpers

@dataclass
class Predictions:
    pred: np.ndarray
    alpha: Optional[np.ndarray]
    beta: Optional[np.ndarray]


def predict(params, config: ModelConfig, x: np.ndarray, chunk: int = PREDICT_CHUNK) -> Predictions:
    """Tape-free forward over a dataset in fixed-size chunks (so results do not
    depend on how the caller batches)."""
    preds, alphas, betas = [], [], []
    with dn.no_grad():
        for start in range(0, x.shape[0], chunk):
            out = forward(x[start:start + chunk], params, config)
            preds.append(out.pred.values)
            if out.alpha is not None:
                alphas.append(out.alpha.values)
                betas.append(out.beta.values)
    return Predictions(
        np.concatenate(preds),
        np.concatenate(alphas) if alphas else None,
        np.concatenate(betas) if betas else None,
    )


def evaluate(params, config: ModelConfig, ds: Dataset):
    if not ds.has_labels:
        raise ValueError("evaluation needs a labeled dataset")
    return task_metric(config.task, predict(params, config, ds.x).pred, ds.y)


def structure_matrix(params, config: ModelConfig, x: np.ndarray) -> np.ndarray:
    """Dataset-averaged aggregated structure matrix A (M x M)."""
    if isinstance(params, BaselineParams):
        raise ValueError("the plain LSTM baseline has no structure weights")
    beta = predict(params, config, x).beta
    n_lags = config.N if config.lag_aware else 1
    return aggregate_structure(beta, config.M, n_lags).mean(axis=0)


# ---------------------------------------------------------------------------
# training

@dataclass
class TrainReport:
    label_loss: list[float] = field(default_factory=list)
    alpha_loss: list[float] = field(default_factory=list)
    beta_loss: list[float] = field(default_factory=list)
    total_loss: list[float] = field(default_factory=list)
    target_metric: list[Optional[float]] = field(default_factory=list)
    epoch_seconds: list[float] = field(default_factory=list)
    metric_name: str = "auc"
    structure_source: Optional[np.ndarray] = None
    structure_target: Optional[np.ndarray] = None

    @property
    def epochs(self) -> int:
        return len(self.total_loss)

    def rows(self) -> list[tuple]:
        """(epoch, L_y, L_alpha, L_beta, total, target_metric) per epoch."""
        return [
            (k + 1, self.label_loss[k], self.alpha_loss[k], self.beta_loss[k], self.total_loss[k], self.target_metric[k])
            for k in range(self.epochs)
        ]


def _batch_plan(n_src: int, n_tgt: int, config: ModelConfig, rng: np.random.Generator):
    # Independent shuffles; the shorter domain is cycled to the longer one's length.
    length = max(n_src, n_tgt) if config.uses_target else n_src
    src = np.resize(rng.permutation(n_src), length)
    tgt = np.resize(rng.permutation(n_tgt), length) if config.uses_target else None
    for start in range(0, length, config.batch_size):
        stop = start + config.batch_size
        yield src[start:stop], (tgt[start:stop] if tgt is not None else None)


def _check_dataset(ds: Dataset, config: ModelConfig, role: str) -> None:
    if len(ds) == 0:
        raise ValueError(f"{role} dataset is empty")
    if (ds.M, ds.N) != (config.M, config.N):
        raise ValueError(f"{role} dataset has (M, N) = ({ds.M}, {ds.N}); config expects ({config.M}, {config.N})")


def train(source: Dataset, target: Optional[Dataset], config: ModelConfig, eval_set: Optional[Dataset] = None,
          params=None):
    """Fit on labeled ``source`` and unlabeled ``target``; returns ``(params, report)``.

    Only ``target.x`` is read. ``eval_set`` (usually held-out target data) is
    scored after every epoch for the report and never influences the updates.
    """
    _check_dataset(source, config, "source")
    if not source.has_labels:
        raise ValueError("every source sample needs a label")
    if config.uses_target:
        if target is None:
            raise ValueError(f"ablation {config.ablation!r} needs a target dataset")
        _check_dataset(target, config, "target")
    if eval_set is not None:
        _check_dataset(eval_set, config, "evaluation")
    init_seq, shuffle_seq = np.random.SeedSequence(config.seed).spawn(2)
    if params is None:
        params = init_params(config, np.random.default_rng(init_seq))
    shuffle_rng = np.random.default_rng(shuffle_seq)
    named = params.tensors()
    state = AdamState(lr=config.lr)
    report = TrainReport(metric_name="auc" if config.task == "classification" else "rmse")
    tgt_x = target.x if config.uses_target else None
    n_tgt = len(target) if config.uses_target else 0

    for epoch in range(config.epochs):
        tic = time.perf_counter()
        sums = np.zeros(4)
        n_batches = 0
        for src_idx, tgt_idx in _batch_plan(len(source), n_tgt, config, shuffle_rng):
            terms = total_loss(
                source.x[src_idx],
                source.y[src_idx],
                tgt_x[tgt_idx] if tgt_idx is not None else None,
                params,
                config,
            )
            dn.backward(terms.total)
            dn.adam_step(named, state)
            sums += [terms.label.item(), terms.alpha.item(), terms.beta.item(), terms.total.item()]
            n_batches += 1
        means = sums / n_batches
        report.label_loss.append(float(means[0]))
        report.alpha_loss.append(float(means[1]))
        report.beta_loss.append(float(means[2]))
        report.total_loss.append(float(means[3]))
        metric = evaluate(params, config, eval_set).value if eval_set is not None else None
        report.target_metric.append(metric)
        report.epoch_seconds.append(time.perf_counter() - tic)
        log.info(
            "epoch %d  L_y=%.4f L_alpha=%.4f L_beta=%.4f total=%.4f %s=%s",
            epoch + 1, means[0], means[1], means[2], means[3], report.metric_name,
            "n/a" if metric is None else f"{metric:.4f}",
        )

    if isinstance(params, ModelParams):
        report.structure_source = structure_matrix(params, config, source.x)
        if target is not None:
            report.structure_target = structure_matrix(params, config, target.x)
    return params, report
