"""Source/target pairs from one sparse lagged causal graph.

Domains share the graph, coefficients and label rule. They differ only in

* a lag shift added to every edge's base lag (response time), and
* a per-sample offset: the first ``o`` steps are baseline noise, after which
  the mechanism switches on,

plus an optional noise-scale multiplier.

Root variables are AR(1) drivers. A child is the sum of its lagged parents plus
process noise. Observed values add measurement noise on top of the latent
values; labels are computed from the latent values at the final step.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np

from .datasets import Dataset
from .segmenter import TimeSeriesSample


@dataclass
class Edge:
    parent: int
    child: int
    coef: float
    base_lag: int = 1


@dataclass
class LabelRule:
    variables: list[int]
    weights: list[float]
    bias: float = 0.0


@dataclass
class CausalGraphSpec:
    M: int
    edges: list[Edge]
    label_rule: LabelRule
    noise_std: float = 0.3
    ar_coef: float = 0.6
    driver_std: float = 1.0
    obs_noise_std: float = 0.0
    task: str = "classification"

    def __post_init__(self):
        self.edges = [e if isinstance(e, Edge) else Edge(**e) for e in self.edges]
        if isinstance(self.label_rule, dict):
            self.label_rule = LabelRule(**self.label_rule)
        self.validate()

    def validate(self) -> None:
        if self.M < 1:
            raise ValueError("M must be >= 1")
        if len(self.edges) > 2 * self.M:
            raise ValueError(f"graph is not sparse: {len(self.edges)} edges for M={self.M}")
        for e in self.edges:
            if not (0 <= e.parent < self.M and 0 <= e.child < self.M):
                raise ValueError(f"edge {e} references a variable outside 0..{self.M - 1}")
            if e.base_lag < 1:
                raise ValueError(f"edge {e} needs base_lag >= 1 (no instantaneous effects)")
            if not math.isfinite(e.coef):
                raise ValueError(f"edge {e} has a non-finite coefficient")
        rule = self.label_rule
        if len(rule.variables) != len(rule.weights) or not rule.variables:
            raise ValueError("label rule needs matching, non-empty variables and weights")
        if any(not 0 <= v < self.M for v in rule.variables):
            raise ValueError("label rule references an unknown variable")
        if min(self.noise_std, self.driver_std, self.obs_noise_std) < 0:
            raise ValueError("noise levels must be non-negative")
        if self.task not in ("classification", "regression"):
            raise ValueError(f"unknown task {self.task!r}")

    @property
    def roots(self) -> list[int]:
        children = {e.child for e in self.edges}
        return [i for i in range(self.M) if i not in children]

    @property
    def max_base_lag(self) -> int:
        return max((e.base_lag for e in self.edges), default=0)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "CausalGraphSpec":
        return cls(**d)


@dataclass
class DomainSpec:
    lag_shift: int = 0
    offset_range: tuple[int, int] = (0, 0)
    noise_scale: float = 1.0

    def __post_init__(self):
        self.offset_range = tuple(int(v) for v in self.offset_range)
        a, b = self.offset_range
        if a < 0 or a > b:
            raise ValueError(f"offset range must satisfy 0 <= a <= b, got {self.offset_range}")
        if self.noise_scale < 0:
            raise ValueError("noise_scale must be non-negative")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["offset_range"] = list(self.offset_range)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "DomainSpec":
        return cls(**d)


def default_graph() -> CausalGraphSpec:
    """Six variables, two AR(1) drivers, six lagged edges."""
    edges = [
        Edge(0, 2, 0.9, 1),
        Edge(1, 3, 0.9, 1),
        Edge(2, 4, 0.8, 1),
        Edge(3, 4, -0.8, 2),
        Edge(0, 5, 0.8, 2),
        Edge(3, 5, 0.7, 1),
    ]
    return CausalGraphSpec(M=6, edges=edges, label_rule=LabelRule([4, 5], [1.0, 1.0], 0.0), obs_noise_std=0.5)


def default_domains() -> tuple[DomainSpec, DomainSpec]:
    return DomainSpec(lag_shift=0, offset_range=(0, 2)), DomainSpec(lag_shift=2, offset_range=(2, 5))


def min_length(graph: CausalGraphSpec, dom: DomainSpec) -> int:
    """Smallest admissible N (strictly above max effective lag + max offset)."""
    return graph.max_base_lag + dom.lag_shift + dom.offset_range[1] + 1


def simulate_latent(graph: CausalGraphSpec, dom: DomainSpec, n: int, N: int, rng: np.random.Generator):
    """Latent and observed series ``(n, M, N)`` plus the per-sample offsets.

    All random draws have shapes independent of the domain spec, so two
    domains generated from the same seed see the same noise.
    """
    for e in graph.edges:
        if e.base_lag + dom.lag_shift < 1:
            raise ValueError(f"edge {e} has effective lag < 1 under lag_shift {dom.lag_shift}")
    if N < min_length(graph, dom):
        raise ValueError(
            f"N={N} is too short: need N > max lag ({graph.max_base_lag + dom.lag_shift}) "
            f"+ max offset ({dom.offset_range[1]})"
        )
    M = graph.M
    a, b = dom.offset_range
    offsets = a + np.floor(rng.random(n) * (b - a + 1)).astype(int)
    driver = rng.standard_normal((n, M, N))
    process = rng.standard_normal((n, M, N))
    baseline = rng.standard_normal((n, M, N))
    measurement = rng.standard_normal((n, M, N))

    noise = graph.noise_std * dom.noise_scale
    roots = graph.roots
    incoming: dict[int, list[Edge]] = {}
    for e in graph.edges:
        incoming.setdefault(e.child, []).append(e)

    z = np.zeros((n, M, N))
    for t in range(N):
        active = t >= offsets
        step = np.empty((n, M))
        prev = z[:, :, t - 1] if t else np.zeros((n, M))
        for r in roots:
            step[:, r] = graph.ar_coef * prev[:, r] + graph.driver_std * driver[:, r, t]
        for child, edges in incoming.items():
            acc = noise * process[:, child, t]
            for e in edges:
                src_t = t - (e.base_lag + dom.lag_shift)
                if src_t >= 0:
                    acc = acc + e.coef * z[:, e.parent, src_t]
            step[:, child] = acc
        z[:, :, t] = np.where(active[:, None], step, noise * baseline[:, :, t])
    x = z + graph.obs_noise_std * dom.noise_scale * measurement
    return z, x, offsets


def label_values(graph: CausalGraphSpec, z_final: np.ndarray) -> np.ndarray:
    """Labels from final-step latent values ``(n, M)``."""
    rule = graph.label_rule
    s = z_final[:, rule.variables] @ np.asarray(rule.weights, dtype=np.float64) + rule.bias
    p = 1.0 / (1.0 + np.exp(-s))
    if graph.task == "classification":
        return (p > 0.5).astype(np.float64)
    return p


def generate(graph: CausalGraphSpec, dom: DomainSpec, n: int, N: int, seed: int, domain: str = "source",
             id_prefix: Optional[str] = None) -> list[TimeSeriesSample]:
    """``n`` labeled samples of length ``N`` for one domain."""
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.default_rng(seed)
    z, x, _ = simulate_latent(graph, dom, n, N, rng)
    y = label_values(graph, z[:, :, -1])
    prefix = id_prefix or domain
    return [TimeSeriesSample(x[k], float(y[k]), domain, f"{prefix}-{k:05d}") for k in range(n)]


def generate_dataset(graph: CausalGraphSpec, dom: DomainSpec, n: int, N: int, seed: int, domain: str = "source",
                     id_prefix: Optional[str] = None) -> Dataset:
    meta = {
        "task": graph.task,
        "graph": graph.to_dict(),
        "domain_spec": dom.to_dict(),
        "seed": seed,
        "domain": domain,
    }
    return Dataset.from_samples(generate(graph, dom, n, N, seed, domain, id_prefix), meta)


def split(ds: Dataset, train_frac: float, seed: int) -> tuple[Dataset, Dataset]:
    """Seeded disjoint split, stratified by label for classification data."""
    if not 0 < train_frac < 1:
        raise ValueError("train_frac must lie strictly between 0 and 1")
    n = len(ds)
    n_train = int(round(train_frac * n))
    if n_train < 1 or n_train > n - 1:
        raise ValueError(f"split of {n} samples at {train_frac} leaves an empty side")
    rng = np.random.default_rng(seed)
    if ds.task == "classification" and ds.has_labels:
        # Interleave the classes in shuffled order so any prefix is stratified.
        groups = [rng.permutation(np.flatnonzero(ds.y == c)) for c in np.unique(ds.y)]
        keys = np.concatenate([(np.arange(g.size) + 0.5) / g.size for g in groups])
        members = np.concatenate(groups)
        order = members[np.lexsort((members, keys))]
    else:
        order = rng.permutation(n)
    train_idx = np.sort(order[:n_train])
    test_idx = np.sort(order[n_train:])
    return ds.subset(train_idx), ds.subset(test_idx)


@dataclass
class BenchmarkData:
    source_train: Dataset
    source_test: Dataset
    target_train: Dataset
    target_test: Dataset
    graph: CausalGraphSpec
    domains: tuple[DomainSpec, DomainSpec]
    seed: int = 0
    files: dict = field(default_factory=dict)

    def as_dict(self) -> dict[str, Dataset]:
        return {
            "source_train": self.source_train,
            "source_test": self.source_test,
            "target_train": self.target_train,
            "target_test": self.target_test,
        }


def make_benchmark(graph: Optional[CausalGraphSpec] = None, domains: Optional[Sequence[DomainSpec]] = None,
                   n_train: int = 1000, n_test: int = 500, N: int = 24, seed: int = 0) -> BenchmarkData:
    """Four datasets (source/target x train/test) sharing one generating graph."""
    graph = graph or default_graph()
    src_dom, tgt_dom = domains or default_domains()
    gen_src, gen_tgt, split_src, split_tgt = np.random.SeedSequence(seed).generate_state(4)
    frac = n_train / (n_train + n_test)
    out = {}
    for name, dom, gseed, sseed in (("source", src_dom, gen_src, split_src), ("target", tgt_dom, gen_tgt, split_tgt)):
        ds = generate_dataset(graph, dom, n_train + n_test, N, int(gseed), name)
        ds.meta["seed"] = seed
        out[name] = split(ds, frac, int(sseed))
    return BenchmarkData(out["source"][0], out["source"][1], out["target"][0], out["target"][1], graph,
                         (src_dom, tgt_dom), seed)
