"""Experiment harness: validated JSON configs, multi-seed ST-vs-IST runs,
comparison reports, labeled-budget sweeps, and clustering-time tables.

All tabular outputs are CSV, reports also get a JSON form, and every file is
written atomically (temp file + rename). Wall-clock columns are the only
fields that vary between identical reruns; everything else is a pure
function of (config, seeds).
"""

from __future__ import annotations

import concurrent.futures
import csv
import io
import json
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import clustering
from .classifiers import ClassifierModel, RandomFeatureRidge, SoftmaxSGD
from .data import (Dataset, LabeledSet, UnlabeledSet, apply_standardize, load_csv,
                   load_idx, make_blobs, split_ssl, standardize)
from .querylist import BatchSchedule
from .training import (SelfTrainConfig, TrainingRoundError, TrainingTrajectory,
                       ist_train, st_train)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_PARTIAL = 3

BACKBONE_KINDS = ("random_feature_ridge", "softmax_sgd")


class ConfigError(ValueError):
    """Invalid experiment config; ``path`` points at the offending field."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


@dataclass
class ExperimentConfig:
    dataset: dict
    split: dict
    backbone: dict
    selftrain: dict
    methods: list[str]
    cluster_options: dict
    seeds: list[int]
    output_dir: str
    raw: dict = field(repr=False, default_factory=dict)


def _require(doc: dict, key: str, path: str):
    if key not in doc:
        raise ConfigError(f"{path}.{key}", "missing required field")
    return doc[key]


def _check_number(value, path: str, *, integer=False, minimum=None, maximum=None,
                  exclusive_min=None):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(path, f"expected a number, got {value!r}")
    if integer and not isinstance(value, int):
        raise ConfigError(path, f"expected an integer, got {value!r}")
    if minimum is not None and value < minimum:
        raise ConfigError(path, f"must be >= {minimum}, got {value}")
    if exclusive_min is not None and value <= exclusive_min:
        raise ConfigError(path, f"must be > {exclusive_min}, got {value}")
    if maximum is not None and value > maximum:
        raise ConfigError(path, f"must be <= {maximum}, got {value}")
    return value


def validate_config(doc: dict) -> ExperimentConfig:
    """Validate a raw config document; raises ConfigError with a field path."""
    if not isinstance(doc, dict):
        raise ConfigError("$", "config must be a JSON object")

    dataset = _require(doc, "dataset", "$")
    source = _require(dataset, "source", "$.dataset")
    if source == "blobs":
        _check_number(_require(dataset, "class_count", "$.dataset"),
                      "$.dataset.class_count", integer=True, minimum=2)
        _check_number(_require(dataset, "per_class", "$.dataset"),
                      "$.dataset.per_class", integer=True, minimum=1)
        _check_number(_require(dataset, "dims", "$.dataset"),
                      "$.dataset.dims", integer=True, minimum=1)
        _check_number(_require(dataset, "spread", "$.dataset"),
                      "$.dataset.spread", exclusive_min=0.0)
        if dataset.get("min_separation") is not None:
            _check_number(dataset["min_separation"], "$.dataset.min_separation",
                          exclusive_min=0.0)
    elif source == "csv":
        path = _require(dataset, "path", "$.dataset")
        if not Path(path).exists():
            raise ConfigError("$.dataset.path", f"file does not exist: {path}")
    elif source == "idx":
        for key in ("images_path", "labels_path"):
            path = _require(dataset, key, "$.dataset")
            if not Path(path).exists():
                raise ConfigError(f"$.dataset.{key}", f"file does not exist: {path}")
    else:
        raise ConfigError("$.dataset.source", f"unknown source {source!r}")

    split = _require(doc, "split", "$")
    _check_number(_require(split, "labels_per_class", "$.split"),
                  "$.split.labels_per_class", integer=True, minimum=1)
    tf = _check_number(_require(split, "test_fraction", "$.split"),
                       "$.split.test_fraction", exclusive_min=0.0)
    if tf >= 1.0:
        raise ConfigError("$.split.test_fraction", f"must be < 1, got {tf}")

    backbone = _require(doc, "backbone", "$")
    kind = _require(backbone, "kind", "$.backbone")
    if kind not in BACKBONE_KINDS:
        raise ConfigError("$.backbone.kind",
                          f"unknown backbone {kind!r}; implemented: {BACKBONE_KINDS}")
    if kind == "random_feature_ridge":
        _check_number(backbone.get("hidden_width", 512), "$.backbone.hidden_width",
                      integer=True, minimum=1)
        _check_number(backbone.get("ridge_lambda", 1e-2), "$.backbone.ridge_lambda",
                      exclusive_min=0.0)
        _check_number(backbone.get("temperature", 0.2), "$.backbone.temperature",
                      exclusive_min=0.0)
    else:
        _check_number(backbone.get("learning_rate", 0.03), "$.backbone.learning_rate",
                      exclusive_min=0.0)
        _check_number(backbone.get("batch_size", 64), "$.backbone.batch_size",
                      integer=True, minimum=1)
        _check_number(backbone.get("epochs", 20), "$.backbone.epochs",
                      integer=True, minimum=0)

    st = _require(doc, "selftrain", "$")
    schedule = st.get("schedule", {})
    try:
        sched = BatchSchedule(schedule.get("initial_fraction", 0.2),
                              schedule.get("rounds", 8),
                              schedule.get("growth", "equal"))
    except ValueError as exc:
        raise ConfigError("$.selftrain.schedule", str(exc)) from None
    rounds = st.get("rounds", sched.rounds + 4)
    _check_number(rounds, "$.selftrain.rounds", integer=True, minimum=sched.rounds + 1)
    _check_number(st.get("confidence_threshold", 0.95),
                  "$.selftrain.confidence_threshold", minimum=0.0, maximum=1.0)
    _check_number(st.get("pseudo_weight", 1.0), "$.selftrain.pseudo_weight",
                  exclusive_min=0.0, maximum=1.0)

    cl = _require(doc, "clustering", "$")
    methods = _require(cl, "methods", "$.clustering")
    if not isinstance(methods, list) or not methods:
        raise ConfigError("$.clustering.methods", "expected a non-empty list")
    for i, m in enumerate(methods):
        if m not in clustering.METHODS:
            raise ConfigError(f"$.clustering.methods[{i}]",
                              f"unknown method {m!r}; implemented: {clustering.METHODS}")

    seeds = _require(doc, "seeds", "$")
    if not isinstance(seeds, list) or not seeds:
        raise ConfigError("$.seeds", "expected a non-empty list of integers")
    for i, s in enumerate(seeds):
        if not isinstance(s, int) or isinstance(s, bool):
            raise ConfigError(f"$.seeds[{i}]", f"expected an integer, got {s!r}")

    output_dir = doc.get("output_dir", "results")
    return ExperimentConfig(dataset=dataset, split=split, backbone=backbone,
                            selftrain=st, methods=list(methods),
                            cluster_options={m: cl.get(m, {}) for m in clustering.METHODS},
                            seeds=list(seeds), output_dir=output_dir, raw=doc)


def load_config(path: str) -> ExperimentConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ConfigError("$", f"cannot read config: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError("$", f"invalid JSON at line {exc.lineno}: {exc.msg}") from None
    return validate_config(doc)


def build_dataset(spec: dict, seed: int) -> Dataset:
    source = spec["source"]
    if source == "blobs":
        ds = make_blobs(spec["class_count"], spec["per_class"], spec["dims"],
                        spec["spread"], seed, spec.get("min_separation"))
    elif source == "csv":
        ds = load_csv(spec["path"], spec.get("label_column"))
    else:
        ds = load_idx(spec["images_path"], spec["labels_path"])
    max_rows = spec.get("max_rows")
    if max_rows is not None and ds.n > max_rows:
        ds = ds.take(np.arange(max_rows))
    return ds


def make_backbone(spec: dict, class_count: int, input_dim: int, seed: int) -> ClassifierModel:
    if spec["kind"] == "random_feature_ridge":
        return RandomFeatureRidge(class_count, input_dim,
                                  hidden_width=spec.get("hidden_width", 512),
                                  ridge_lambda=spec.get("ridge_lambda", 1e-2),
                                  temperature=spec.get("temperature", 0.2),
                                  seed=seed)
    return SoftmaxSGD(class_count, input_dim,
                      learning_rate=spec.get("learning_rate", 0.03),
                      batch_size=spec.get("batch_size", 64),
                      epochs=spec.get("epochs", 20),
                      warm_start=spec.get("warm_start", True),
                      hidden_width=spec.get("hidden_width"),
                      seed=seed)


def _cluster_config(method: str, options: dict, seed: int):
    opts = dict(options or {})
    if method == "kmeans":
        return clustering.KMeansConfig(k=opts.get("k"), max_iter=opts.get("max_iter", 300),
                                       tol=opts.get("tol", 1e-4),
                                       init=opts.get("init", "kmeanspp"), seed=seed)
    if method == "minibatch_kmeans":
        return clustering.MiniBatchKMeansConfig(
            k=opts.get("k"), max_iter=opts.get("max_iter", 300),
            tol=opts.get("tol", 1e-4), init=opts.get("init", "kmeanspp"), seed=seed,
            batch_size=opts.get("batch_size", 256),
            max_no_improve=opts.get("max_no_improve", 10))
    if method == "meanshift":
        return clustering.MeanShiftConfig(
            bandwidth=opts.get("bandwidth"), merge_tol=opts.get("merge_tol", 0.5),
            max_iter=opts.get("max_iter", 300), subsample=opts.get("subsample", 1000),
            shift_subsample=opts.get("shift_subsample", 1000), seed=seed)
    return clustering.BirchConfig(branching_factor=opts.get("branching_factor", 50),
                                  threshold=opts.get("threshold"),
                                  global_k=opts.get("global_k"), seed=seed)


def make_selftrain_config(config: ExperimentConfig, mode: str, method: str | None,
                          seed: int) -> SelfTrainConfig:
    st = config.selftrain
    schedule = st.get("schedule", {})
    sched = BatchSchedule(schedule.get("initial_fraction", 0.2),
                          schedule.get("rounds", 8), schedule.get("growth", "equal"))
    cluster_cfg = None
    if mode == "ist":
        cluster_cfg = _cluster_config(method, config.cluster_options.get(method, {}),
                                      seed)
    return SelfTrainConfig(mode=mode,
                           rounds=st.get("rounds", sched.rounds + 4),
                           confidence_threshold=st.get("confidence_threshold", 0.95),
                           pseudo_weight=st.get("pseudo_weight", 1.0),
                           schedule=sched,
                           cluster_method=method if mode == "ist" else None,
                           cluster_config=cluster_cfg,
                           certainty_norm=st.get("certainty_norm", "global"),
                           freeze_labels=st.get("freeze_labels", False),
                           seed=seed)


def _prepare_split(config: ExperimentConfig, seed: int):
    dataset = build_dataset(config.dataset, seed)
    labeled, unlabeled, test = split_ssl(dataset, config.split["labels_per_class"],
                                         config.split["test_fraction"], seed)
    if config.dataset.get("standardize"):
        train = np.vstack([labeled.features, unlabeled.features])
        _, stats = standardize(train)
        labeled = LabeledSet(apply_standardize(stats, labeled.features), labeled.labels,
                             labeled.ids, labeled.class_count)
        unlabeled = UnlabeledSet(apply_standardize(stats, unlabeled.features),
                                 unlabeled.ids, unlabeled.eval_labels())
        test = Dataset(apply_standardize(stats, test.features), test.labels,
                       test.class_count, test.ids)
    return labeled, unlabeled, test


def execute_task(config: ExperimentConfig, seed: int, method: str) -> TrainingTrajectory:
    """Run one (method, seed) cell; ``method`` is 'st' or a clustering tag."""
    labeled, unlabeled, test = _prepare_split(config, seed)
    backbone = make_backbone(config.backbone, labeled.class_count,
                             labeled.features.shape[1], seed)
    if method == "st":
        cfg = make_selftrain_config(config, "st", None, seed)
        _, traj = st_train(labeled, unlabeled, test, backbone, cfg)
    else:
        cfg = make_selftrain_config(config, "ist", method, seed)
        _, traj = ist_train(labeled, unlabeled, test, backbone, cfg)
    return traj


def _pool_worker(raw_config: dict, seed: int, method: str):
    config = validate_config(raw_config)
    try:
        traj = execute_task(config, seed, method)
        return method, seed, traj, None
    except TrainingRoundError as exc:
        return method, seed, exc.trajectory, str(exc)
    except Exception as exc:  # noqa: BLE001 - cell failures must not kill the harness
        return method, seed, None, str(exc)


@dataclass
class ReportCell:
    method: str
    seed: int
    status: str  # "ok" | "failed"
    final_accuracy: float | None = None
    total_processed: int | None = None
    total_seconds: float | None = None
    cluster_seconds: float | None = None
    error: str | None = None


@dataclass
class ComparisonReport:
    cells: list[ReportCell]

    def methods(self) -> list[str]:
        seen = []
        for c in self.cells:
            if c.method not in seen:
                seen.append(c.method)
        return seen

    def aggregates(self) -> dict:
        """Median and interquartile range per method, recomputed from raw cells."""
        out = {}
        for method in self.methods():
            ok = [c for c in self.cells if c.method == method and c.status == "ok"]
            entry = {"runs": len([c for c in self.cells if c.method == method]),
                     "ok": len(ok)}
            for fld in ("final_accuracy", "total_processed", "total_seconds",
                        "cluster_seconds"):
                values = [getattr(c, fld) for c in ok if getattr(c, fld) is not None]
                if values:
                    q25, q75 = np.quantile(values, [0.25, 0.75])
                    entry[fld] = {"median": float(np.median(values)),
                                  "iqr": float(q75 - q25)}
            out[method] = entry
        return out

    def to_json_doc(self, config_echo: dict) -> dict:
        return {
            "config": config_echo,
            "cells": [vars(c) for c in self.cells],
            "aggregates": self.aggregates(),
        }

    def to_csv_text(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf)
        writer.writerow(["method", "seed", "status", "final_accuracy",
                         "total_processed", "total_seconds", "cluster_seconds", "error"])
        for c in self.cells:
            writer.writerow([
                c.method, c.seed, c.status,
                "" if c.final_accuracy is None else repr(c.final_accuracy),
                "" if c.total_processed is None else c.total_processed,
                "" if c.total_seconds is None else repr(c.total_seconds),
                "" if c.cluster_seconds is None else repr(c.cluster_seconds),
                c.error or "",
            ])
        return buf.getvalue()


def read_report_csv(path: str) -> ComparisonReport:
    cells = []
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            cells.append(ReportCell(
                method=row["method"], seed=int(row["seed"]), status=row["status"],
                final_accuracy=float(row["final_accuracy"]) if row["final_accuracy"] else None,
                total_processed=int(row["total_processed"]) if row["total_processed"] else None,
                total_seconds=float(row["total_seconds"]) if row["total_seconds"] else None,
                cluster_seconds=float(row["cluster_seconds"]) if row["cluster_seconds"] else None,
                error=row["error"] or None))
    return ComparisonReport(cells)


def report_deterministic_view(doc: dict) -> dict:
    """Report JSON with every wall-clock field removed, for rerun comparison."""

    def strip(obj):
        if isinstance(obj, dict):
            return {k: strip(v) for k, v in obj.items() if "seconds" not in k}
        if isinstance(obj, list):
            return [strip(v) for v in obj]
        return obj

    return strip(doc)


def _atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)


def run(config: ExperimentConfig, workers: int = 1,
        out_dir: str | None = None) -> tuple[int, dict]:
    """Execute ST plus one IST per clustering method for every seed.

    Writes trajectory CSVs with JSON summaries, the comparison report
    (CSV + JSON), and plot-data files. Returns (exit_code, report_doc).
    """
    out = Path(out_dir or config.output_dir)
    tasks = [(seed, method) for seed in config.seeds
             for method in ["st"] + list(config.methods)]

    results: dict[tuple[str, int], tuple[TrainingTrajectory | None, str | None]] = {}
    if workers > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_pool_worker, config.raw, seed, method)
                       for seed, method in tasks]
            for fut in futures:
                method, seed, traj, error = fut.result()
                results[(method, seed)] = (traj, error)
    else:
        for seed, method in tasks:
            method, seed, traj, error = _pool_worker(config.raw, seed, method)
            results[(method, seed)] = (traj, error)

    cells = []
    acc_rows = []
    cluster_rows = []
    for seed, method in tasks:
        traj, error = results[(method, seed)]
        name = "st" if method == "st" else f"ist-{method.replace('_', '-')}"
        if traj is not None and error is None:
            cells.append(ReportCell(name, seed, "ok", traj.final_accuracy,
                                    traj.total_processed, traj.total_seconds,
                                    traj.cluster_seconds))
        else:
            cells.append(ReportCell(name, seed, "failed", error=error))
        if traj is not None:
            _atomic_write(out / "trajectories" / f"{name}_seed{seed}.csv",
                          traj.to_csv_text())
            _atomic_write(out / "trajectories" / f"{name}_seed{seed}.summary.json",
                          json.dumps(traj.summary(), indent=2, sort_keys=True))
            for t in range(traj.rounds_completed):
                acc_rows.append((name, seed, t, traj.accuracy[t]))
            if method != "st":
                cluster_rows.append((name, seed, traj.cluster_seconds))

    report = ComparisonReport(cells)
    doc = report.to_json_doc(config.raw)
    _atomic_write(out / "report.csv", report.to_csv_text())
    _atomic_write(out / "report.json", json.dumps(doc, indent=2, sort_keys=True))

    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(["method", "seed", "round", "accuracy"])
    for row in acc_rows:
        writer.writerow([row[0], row[1], row[2], repr(row[3])])
    _atomic_write(out / "plotdata" / "accuracy_vs_round.csv", buf.getvalue())

    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(["method", "seed", "cluster_seconds"])
    for row in cluster_rows:
        writer.writerow([row[0], row[1], repr(row[2])])
    _atomic_write(out / "plotdata" / "cluster_time.csv", buf.getvalue())

    failed = any(c.status == "failed" for c in cells)
    return (EXIT_PARTIAL if failed else EXIT_OK), doc


def sweep_labeled_budget(config: ExperimentConfig, budgets: list[int],
                         workers: int = 1,
                         out_dir: str | None = None) -> tuple[int, dict]:
    """Re-run the comparison at several labeled budgets; emit one merged long CSV."""
    out = Path(out_dir or config.output_dir)
    merged = []
    worst = EXIT_OK
    sub_docs = {}
    for budget in budgets:
        raw = json.loads(json.dumps(config.raw))
        raw["split"]["labels_per_class"] = budget
        raw["output_dir"] = str(out / f"budget_{budget}")
        try:
            sub = validate_config(raw)
            _probe_budget(sub, budget)
        except (ConfigError, ValueError) as exc:
            raise ConfigError("$.split.labels_per_class",
                              f"budget {budget} infeasible: {exc}") from None
        code, doc = run(sub, workers=workers)
        worst = max(worst, code)
        sub_docs[budget] = doc
        for cell in doc["cells"]:
            if cell["status"] == "ok":
                merged.append((budget, cell["method"], cell["seed"],
                               cell["final_accuracy"], cell["total_seconds"]))

    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(["budget", "method", "seed", "final_accuracy", "total_seconds"])
    for row in merged:
        writer.writerow([row[0], row[1], row[2], repr(row[3]), repr(row[4])])
    _atomic_write(out / "sweep_merged.csv", buf.getvalue())
    return worst, {"budgets": {str(b): d for b, d in sub_docs.items()}}


def _probe_budget(config: ExperimentConfig, budget: int) -> None:
    """Fail fast (naming the budget) if a split would be infeasible."""
    dataset = build_dataset(config.dataset, config.seeds[0])
    split_ssl(dataset, budget, config.split["test_fraction"], config.seeds[0])


def cluster_timing(config: ExperimentConfig,
                   out_dir: str | None = None) -> tuple[int, dict]:
    """Fit every configured method on the unlabeled split, once per seed."""
    out = Path(out_dir or config.output_dir)
    per_method: dict[str, list[float]] = {m: [] for m in config.methods}
    failures: dict[str, str] = {}
    for seed in config.seeds:
        labeled, unlabeled, _ = _prepare_split(config, seed)
        scaled, _ = standardize(unlabeled.features)
        for method in config.methods:
            cfg = _cluster_config(method, config.cluster_options.get(method, {}), seed)
            if getattr(cfg, "k", "absent") is None:
                cfg.k = labeled.class_count
            if getattr(cfg, "global_k", "absent") is None:
                cfg.global_k = labeled.class_count
            try:
                model = clustering.fit_cluster(method, scaled, cfg)
                per_method[method].append(model.fit_seconds)
            except Exception as exc:  # noqa: BLE001 - mark the row, keep timing others
                failures[method] = str(exc)

    table = {}
    for method in config.methods:
        values = per_method[method]
        table[method] = {
            "fit_seconds": values,
            "mean_seconds": float(np.mean(values)) if values else None,
            "median_seconds": float(np.median(values)) if values else None,
            "error": failures.get(method),
        }

    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(["method", "mean_seconds", "median_seconds", "status"])
    for method in config.methods:
        row = table[method]
        writer.writerow([method,
                         "" if row["mean_seconds"] is None else repr(row["mean_seconds"]),
                         "" if row["median_seconds"] is None else repr(row["median_seconds"]),
                         "failed" if row["error"] else "ok"])
    _atomic_write(out / "cluster_time.csv", buf.getvalue())
    _atomic_write(out / "cluster_time.json", json.dumps(table, indent=2, sort_keys=True))
    return (EXIT_PARTIAL if failures else EXIT_OK), table


def preset_config(name: str, out_dir: str = "results",
                  mnist_dir: str | None = None) -> dict:
    """Bundled experiment configurations."""
    if name == "blobs-small":
        return {
            "dataset": {"source": "blobs", "class_count": 4, "per_class": 600,
                        "dims": 2, "spread": 0.5},
            "split": {"labels_per_class": 4, "test_fraction": 0.25},
            "backbone": {"kind": "random_feature_ridge", "hidden_width": 512,
                         "ridge_lambda": 1e-2, "temperature": 0.2},
            "selftrain": {"rounds": 12, "confidence_threshold": 0.95,
                          "schedule": {"initial_fraction": 0.2, "rounds": 8,
                                       "growth": "equal"}},
            "clustering": {"methods": ["kmeans"]},
            "seeds": [1, 2, 3, 4, 5],
            "output_dir": out_dir,
        }
    if name == "blobs-noisy":
        # Same centroid geometry as blobs-small (separation 6 * 0.5) but a much
        # wider spread, which fills the gaps between classes with a noise band.
        doc = preset_config("blobs-small", out_dir)
        doc["dataset"]["spread"] = 1.2
        doc["dataset"]["min_separation"] = 3.0
        return doc
    if name == "mnist-100":
        if mnist_dir is None:
            raise ConfigError("$.dataset", "preset mnist-100 needs --mnist-dir")
        base = Path(mnist_dir)
        return {
            "dataset": {"source": "idx",
                        "images_path": str(base / "train-images-idx3-ubyte"),
                        "labels_path": str(base / "train-labels-idx1-ubyte"),
                        "max_rows": 20000},
            "split": {"labels_per_class": 10, "test_fraction": 0.2},
            "backbone": {"kind": "softmax_sgd", "learning_rate": 0.03,
                         "batch_size": 64, "epochs": 10},
            "selftrain": {"rounds": 12, "confidence_threshold": 0.95,
                          "schedule": {"initial_fraction": 0.2, "rounds": 8,
                                       "growth": "equal"}},
            "clustering": {"methods": ["kmeans"]},
            "seeds": [1, 2, 3],
            "output_dir": out_dir,
        }
    if name == "blobs-timing":
        return {
            "dataset": {"source": "blobs", "class_count": 10, "per_class": 2000,
                        "dims": 50, "spread": 1.0},
            "split": {"labels_per_class": 4, "test_fraction": 0.1},
            "backbone": {"kind": "random_feature_ridge"},
            "selftrain": {"rounds": 9,
                          "schedule": {"initial_fraction": 0.2, "rounds": 8,
                                       "growth": "equal"}},
            "clustering": {"methods": ["kmeans", "minibatch_kmeans", "meanshift"]},
            "seeds": [1, 2, 3, 4, 5],
            "output_dir": out_dir,
        }
    raise ConfigError("$.preset", f"unknown preset {name!r}")
