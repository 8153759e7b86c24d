"""In-memory datasets and the NDJSON file format.

One sample per line::

    {"id": "source-train-00000", "series": [[...], ...], "label": 1.0, "domain": "source"}

``series`` is M rows (variables) of N values. A sidecar ``<name>.meta.json``
records M, N, the task type and, for synthetic data, the generator specs.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional, Sequence

import numpy as np

from .segmenter import TimeSeriesSample


class DatasetError(ValueError):
    """Malformed or inconsistent dataset file."""


@dataclass
class Dataset:
    x: np.ndarray  # (n, M, N)
    y: np.ndarray  # (n,), NaN where no label
    domains: list[str]
    ids: list[str]
    meta: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=np.float64)
        self.y = np.asarray(self.y, dtype=np.float64)
        if self.x.ndim != 3:
            raise DatasetError(f"expected (n, M, N) series, got {self.x.shape}")
        n = self.x.shape[0]
        if self.y.shape != (n,) or len(self.domains) != n or len(self.ids) != n:
            raise DatasetError("series, labels, domains and ids must have equal length")

    def __len__(self) -> int:
        return self.x.shape[0]

    @property
    def M(self) -> int:
        return self.x.shape[1]

    @property
    def N(self) -> int:
        return self.x.shape[2]

    @property
    def task(self) -> str:
        return self.meta.get("task", "classification")

    @property
    def has_labels(self) -> bool:
        return len(self) > 0 and not np.isnan(self.y).any()

    def subset(self, idx) -> "Dataset":
        idx = np.asarray(idx, dtype=np.intp)
        return Dataset(
            self.x[idx],
            self.y[idx],
            [self.domains[k] for k in idx],
            [self.ids[k] for k in idx],
            dict(self.meta),
        )

    def filter_domain(self, domain: str) -> "Dataset":
        return self.subset([k for k, d in enumerate(self.domains) if d == domain])

    def samples(self) -> list[TimeSeriesSample]:
        return [
            TimeSeriesSample(self.x[k], None if np.isnan(self.y[k]) else float(self.y[k]), self.domains[k], self.ids[k])
            for k in range(len(self))
        ]

    @classmethod
    def from_samples(cls, samples: Sequence[TimeSeriesSample], meta: Optional[dict] = None) -> "Dataset":
        if not samples:
            raise DatasetError("no samples")
        shapes = {s.series.shape for s in samples}
        if len(shapes) != 1:
            raise DatasetError(f"samples disagree on (M, N): {sorted(shapes)}")
        return cls(
            np.stack([s.series for s in samples]),
            np.array([np.nan if s.label is None else s.label for s in samples], dtype=np.float64),
            [s.domain for s in samples],
            [s.id for s in samples],
            dict(meta or {}),
        )


def meta_path(path) -> Path:
    path = Path(path)
    return path.with_name(path.name.split(".")[0] + ".meta.json")


def _dump_json(obj, path: Path) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def write_ndjson(ds: Dataset, path, meta: Optional[dict] = None) -> None:
    path = Path(path)
    lines = []
    for k in range(len(ds)):
        label = None if np.isnan(ds.y[k]) else float(ds.y[k])
        rec = {"id": ds.ids[k], "series": ds.x[k].tolist(), "label": label, "domain": ds.domains[k]}
        lines.append(json.dumps(rec))
    path.write_text("\n".join(lines) + "\n")
    info = dict(ds.meta)
    info.update(meta or {})
    info.update({"M": ds.M, "N": ds.N, "task": ds.task, "count": len(ds)})
    _dump_json(info, meta_path(path))


def read_ndjson(path) -> Dataset:
    path = Path(path)
    if not path.exists():
        raise DatasetError(f"dataset file not found: {path}")
    meta: dict[str, Any] = {}
    if meta_path(path).exists():
        meta = json.loads(meta_path(path).read_text())
    xs, ys, domains, ids = [], [], [], []
    with path.open() as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                series = np.asarray(rec["series"], dtype=np.float64)
                label = rec.get("label")
                domain = rec["domain"]
                sid = str(rec["id"])
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise DatasetError(f"{path}:{lineno}: malformed record ({exc})") from exc
            if series.ndim != 2:
                raise DatasetError(f"{path}:{lineno}: series must be a list of rows")
            if not np.isfinite(series).all():
                raise DatasetError(f"{path}:{lineno}: non-finite series value")
            if domain not in ("source", "target"):
                raise DatasetError(f"{path}:{lineno}: unknown domain {domain!r}")
            if label is not None and not (isinstance(label, (int, float)) and math.isfinite(label)):
                raise DatasetError(f"{path}:{lineno}: label must be a finite number or null")
            if xs and series.shape != xs[0].shape:
                raise DatasetError(f"{path}:{lineno}: shape {series.shape} differs from {xs[0].shape}")
            xs.append(series)
            ys.append(np.nan if label is None else float(label))
            domains.append(domain)
            ids.append(sid)
    if not xs:
        raise DatasetError(f"{path}: no samples")
    if "M" in meta and (meta["M"], meta["N"]) != xs[0].shape:
        raise DatasetError(f"{path}: samples are {xs[0].shape} but metadata says ({meta['M']}, {meta['N']})")
    return Dataset(np.stack(xs), np.array(ys), domains, ids, meta)
