"""Command-line entry point: ``sasa gen-data | train | eval | export-structure``.

Exit codes: 0 on success, 1 on runtime failure, 2 on invalid input or config.
Stderr verbosity follows ``SASA_LOG`` (error, info or debug; default info).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import fields
from pathlib import Path
from typing import Optional

import numpy as np

from . import model, synthdata
from .datasets import Dataset, DatasetError, read_ndjson, write_ndjson
from .metrics import MetricReport
from .model import ModelConfig

log = logging.getLogger("sasa")

PATH_KEYS = ("source_train", "target_train", "target_test", "out_dir")
REPORT_COLUMNS = ("epoch", "L_y", "L_alpha", "L_beta", "total", "target_metric")
SPLITS = ("source_train", "source_test", "target_train", "target_test")


class InputError(Exception):
    """Bad flags, files or configs; maps to exit code 2."""


# ---------------------------------------------------------------------------
# run config and parameter snapshots

def load_run_config(path) -> tuple[dict, dict]:
    """Split a run config into (model settings, paths), rejecting unknown keys."""
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except FileNotFoundError:
        raise InputError(f"config not found: {path}")
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: invalid JSON ({exc})")
    if not isinstance(raw, dict):
        raise InputError(f"{path}: config must be a JSON object")
    model_keys = {f.name for f in fields(ModelConfig)}
    unknown = set(raw) - model_keys - set(PATH_KEYS)
    if unknown:
        raise InputError(f"{path}: unknown config keys {sorted(unknown)}")
    for key in ("source_train", "out_dir"):
        if key not in raw:
            raise InputError(f"{path}: missing required key {key!r}")
    paths = {}
    for key in PATH_KEYS:
        if raw.get(key) is None:
            continue
        # Relative paths resolve against the config's own directory.
        p = Path(raw[key])
        paths[key] = p if p.is_absolute() else path.parent / p
        if key != "out_dir" and not paths[key].exists():
            raise InputError(f"{path}: {key} file does not exist: {paths[key]}")
    return {k: v for k, v in raw.items() if k in model_keys}, paths


def save_snapshot(path, params, config: ModelConfig) -> None:
    arrays = {name: t.values for name, t in params.tensors().items()}
    with open(path, "wb") as fh:
        np.savez(fh, __config__=np.array(json.dumps(config.to_dict(), sort_keys=True)), **arrays)


def load_snapshot(path):
    path = Path(path)
    if not path.exists():
        raise InputError(f"snapshot not found: {path}")
    try:
        with np.load(path) as data:
            config = ModelConfig.from_dict(json.loads(str(data["__config__"])))
            stored = {k: data[k] for k in data.files if k != "__config__"}
    except (OSError, KeyError, ValueError) as exc:
        raise InputError(f"{path}: unreadable snapshot ({exc})")
    params = model.init_params(config)
    named = params.tensors()
    if set(stored) != set(named):
        raise InputError(f"{path}: parameter names do not match the stored config")
    for name, t in named.items():
        if stored[name].shape != t.shape:
            raise InputError(f"{path}: {name} has shape {stored[name].shape}, expected {t.shape}")
        t.values[...] = stored[name]
    return params, config


def _read(path) -> Dataset:
    try:
        return read_ndjson(path)
    except DatasetError as exc:
        raise InputError(str(exc))


def _check_shape(ds: Dataset, config: ModelConfig, what: str) -> None:
    if (ds.M, ds.N) != (config.M, config.N):
        raise InputError(f"{what} has (M, N) = ({ds.M}, {ds.N}); model expects ({config.M}, {config.N})")


# ---------------------------------------------------------------------------
# commands

def cmd_gen_data(args) -> int:
    graph = synthdata.default_graph()
    src_dom, tgt_dom = synthdata.default_domains()
    try:
        if args.graph:
            graph = synthdata.CausalGraphSpec.from_dict(json.loads(Path(args.graph).read_text()))
        if args.domain_src:
            src_dom = synthdata.DomainSpec.from_dict(json.loads(Path(args.domain_src).read_text()))
        if args.domain_tgt:
            tgt_dom = synthdata.DomainSpec.from_dict(json.loads(Path(args.domain_tgt).read_text()))
        bench = synthdata.make_benchmark(graph, (src_dom, tgt_dom), args.n, args.n_test, args.len, args.seed)
    except (OSError, json.JSONDecodeError, TypeError, ValueError) as exc:
        raise InputError(str(exc))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for name, ds in bench.as_dict().items():
        write_ndjson(ds, out / f"{name}.ndjson", {"split": name})
        log.info("wrote %s (%d samples)", out / f"{name}.ndjson", len(ds))
    return 0


def _report_csv(report: model.TrainReport) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(REPORT_COLUMNS)
    for row in report.rows():
        writer.writerow(["" if v is None else repr(v) for v in row])
    return buf.getvalue()


def _train_one(settings: dict, paths: dict, seed: int) -> dict:
    config = ModelConfig.from_dict({**settings, "seed": seed})
    source = read_ndjson(paths["source_train"])
    target = read_ndjson(paths["target_train"]) if "target_train" in paths else None
    eval_set = read_ndjson(paths["target_test"]) if "target_test" in paths else None
    params, report = model.train(source, target, config, eval_set=eval_set)
    out = paths["out_dir"]
    tag = f"{config.ablation}_seed{seed}"
    save_snapshot(out / f"params_{tag}.npz", params, config)
    (out / f"report_{tag}.csv").write_text(_report_csv(report))
    final = report.target_metric[-1] if report.target_metric else None
    return {"seed": seed, "target_metric": final, "params": f"params_{tag}.npz", "report": f"report_{tag}.csv"}


def cmd_train(args) -> int:
    settings, paths = load_run_config(args.config)
    if args.ablation:
        settings["ablation"] = args.ablation
    base_seed = args.seed if args.seed is not None else settings.get("seed", 0)
    datasets = {k: _read(p) for k, p in paths.items() if k != "out_dir"}
    first = datasets["source_train"]
    settings.setdefault("M", first.M)
    settings.setdefault("N", first.N)
    settings.setdefault("task", first.task)
    try:
        config = ModelConfig.from_dict({**settings, "seed": base_seed})
    except (TypeError, ValueError) as exc:
        raise InputError(f"{args.config}: {exc}")
    for name, ds in datasets.items():
        _check_shape(ds, config, name)
    if config.uses_target and "target_train" not in datasets:
        raise InputError(f"ablation {config.ablation!r} needs target_train in the config")
    if "target_test" in datasets and not datasets["target_test"].has_labels:
        raise InputError("target_test must be labeled")

    out = paths["out_dir"]
    out.mkdir(parents=True, exist_ok=True)
    seeds = [base_seed + k for k in range(args.seeds)]
    if args.jobs > 1 and len(seeds) > 1:
        with ProcessPoolExecutor(max_workers=min(args.jobs, len(seeds))) as pool:
            runs = list(pool.map(_train_one, [settings] * len(seeds), [paths] * len(seeds), seeds))
    else:
        runs = [_train_one(settings, paths, s) for s in seeds]

    values = [r["target_metric"] for r in runs]
    summary = {
        "ablation": config.ablation,
        "metric": "auc" if config.task == "classification" else "rmse",
        "per_seed": runs,
        "mean": float(np.mean(values)) if None not in values else None,
        "config": {k: v for k, v in config.to_dict().items() if k != "seed"},
    }
    (out / f"summary_{config.ablation}.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    log.info("%s: mean %s = %s", config.ablation, summary["metric"], summary["mean"])
    return 0


def cmd_eval(args) -> int:
    params, config = load_snapshot(args.params)
    ds = _read(args.data)
    _check_shape(ds, config, args.data)
    if not ds.has_labels:
        raise InputError(f"{args.data}: every sample needs a label for evaluation")
    try:
        report: MetricReport = model.evaluate(params, config, ds)
    except ValueError as exc:
        raise InputError(f"{args.data}: {exc}")
    print(json.dumps(report.to_dict(), sort_keys=True))
    return 0


def cmd_export_structure(args) -> int:
    params, config = load_snapshot(args.params)
    if config.architecture != "sasa":
        raise InputError("the plain LSTM baseline has no structure to export")
    ds = _read(args.data).filter_domain(args.domain)
    if len(ds) == 0:
        raise InputError(f"{args.data}: no samples from domain {args.domain!r}")
    _check_shape(ds, config, args.data)
    A = model.structure_matrix(params, config, ds.x)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(range(config.M))
    for row in A:
        writer.writerow([repr(float(v)) for v in row])
    Path(args.out).write_text(buf.getvalue())
    return 0


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sasa", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen-data", help="write a synthetic source/target benchmark as NDJSON")
    gen.add_argument("--graph", help="CausalGraphSpec JSON (default: built-in six-variable graph)")
    gen.add_argument("--domain-src", help="source DomainSpec JSON")
    gen.add_argument("--domain-tgt", help="target DomainSpec JSON")
    gen.add_argument("--n", type=int, default=1000, help="training samples per domain")
    gen.add_argument("--n-test", type=int, default=500, help="test samples per domain")
    gen.add_argument("--len", type=int, default=24, help="series length N")
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--out", required=True, help="output directory")
    gen.set_defaults(func=cmd_gen_data)

    tr = sub.add_parser("train", help="train from a run config")
    tr.add_argument("--config", required=True)
    tr.add_argument("--ablation", choices=model.ABLATIONS)
    tr.add_argument("--seed", type=int, help="overrides the config seed")
    tr.add_argument("--seeds", type=int, default=1, help="train k runs with seeds seed..seed+k-1")
    tr.add_argument("--jobs", type=int, default=1, help="worker processes for --seeds")
    tr.set_defaults(func=cmd_train)

    ev = sub.add_parser("eval", help="print the task metric of a snapshot on a dataset")
    ev.add_argument("--params", required=True)
    ev.add_argument("--data", required=True)
    ev.set_defaults(func=cmd_eval)

    ex = sub.add_parser("export-structure", help="write the dataset-averaged structure matrix as CSV")
    ex.add_argument("--params", required=True)
    ex.add_argument("--data", required=True)
    ex.add_argument("--domain", choices=("source", "target"), required=True)
    ex.add_argument("--out", required=True)
    ex.set_defaults(func=cmd_export_structure)
    return parser


def _configure_logging() -> None:
    level = os.environ.get("SASA_LOG", "info").upper()
    if level not in ("ERROR", "INFO", "DEBUG"):
        level = "INFO"
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr, force=True)


def main(argv: Optional[list[str]] = None) -> int:
    _configure_logging()
    args = build_parser().parse_args(argv)
    if getattr(args, "seeds", 1) < 1 or getattr(args, "jobs", 1) < 1:
        print("error: --seeds and --jobs must be >= 1", file=sys.stderr)
        return 2
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - last-resort handler for the exit-code contract
        log.debug("unhandled failure", exc_info=True)
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
