"""AUC and RMSE, the two task metrics."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class MetricReport:
    metric: str
    value: float
    count: int
    per_seed: list[float] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"metric": self.metric, "value": self.value, "count": self.count, "per_seed": list(self.per_seed)}


def auc(scores, labels) -> float:
    """Mann-Whitney AUC by exhaustive pairwise comparison; ties count one half."""
    scores = np.asarray(scores, dtype=np.float64).ravel()
    labels = np.asarray(labels).ravel()
    if scores.shape != labels.shape:
        raise ValueError("scores and labels must have the same length")
    if not np.isin(labels, (0, 1)).all():
        raise ValueError("labels must be 0 or 1")
    pos = scores[labels == 1]
    neg = scores[labels == 0]
    if pos.size == 0 or neg.size == 0:
        raise ValueError("AUC needs both classes present")
    diff = pos[:, None] - neg[None, :]
    wins = np.count_nonzero(diff > 0) + 0.5 * np.count_nonzero(diff == 0)
    return float(wins / (pos.size * neg.size))


def rmse(preds, targets) -> float:
    preds = np.asarray(preds, dtype=np.float64).ravel()
    targets = np.asarray(targets, dtype=np.float64).ravel()
    if preds.shape != targets.shape:
        raise ValueError(f"length mismatch: {preds.size} predictions vs {targets.size} targets")
    if preds.size == 0:
        raise ValueError("rmse of an empty set")
    return float(np.sqrt(np.mean((preds - targets) ** 2)))


def task_metric(task: str, preds, labels) -> MetricReport:
    if task == "classification":
        return MetricReport("auc", auc(preds, labels), len(labels))
    if task == "regression":
        return MetricReport("rmse", rmse(preds, labels), len(labels))
    raise ValueError(f"unknown task {task!r}")
