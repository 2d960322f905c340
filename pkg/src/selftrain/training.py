"""Self-training loops: the classical all-at-once variant and the incremental
variant that feeds certainty-ordered batches into a growing pseudo-label pool.

Both loops share one round structure. Round 0 fits on the labeled data only;
every later round predicts over the current pool, keeps members whose
confidence clears the threshold, refits on labeled + selected pseudo-labeled
rows, and evaluates. The incremental loop clusters the unlabeled data exactly
once up front to build its query list.
"""

from __future__ import annotations

import csv
import io
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from .classifiers import ClassifierModel
from .clustering import fit_cluster
from .data import Dataset, LabeledSet, UnlabeledSet, standardize
from .querylist import BatchSchedule, build_query_list, partition_batches


class TrainingRoundError(RuntimeError):
    """Backbone failure mid-run; carries the round index and partial trajectory."""

    def __init__(self, round_index: int, trajectory: "TrainingTrajectory", cause: str):
        super().__init__(f"backbone failed at round {round_index}: {cause}")
        self.round_index = round_index
        self.trajectory = trajectory


@dataclass
class SelfTrainConfig:
    mode: str = "st"
    rounds: int | None = None
    confidence_threshold: float = 0.95
    pseudo_weight: float = 1.0
    schedule: BatchSchedule | None = None
    cluster_method: str | None = None
    cluster_config: object | None = None
    certainty_norm: str = "global"
    freeze_labels: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.mode not in ("st", "ist"):
            raise ValueError(f"mode must be 'st' or 'ist', got {self.mode!r}")
        if not 0.0 <= self.confidence_threshold <= 1.0:
            raise ValueError("confidence_threshold must be in [0, 1]")
        if not 0.0 < self.pseudo_weight <= 1.0:
            raise ValueError("pseudo_weight must be in (0, 1]")
        if self.mode == "ist":
            if self.schedule is None:
                self.schedule = BatchSchedule()
            if self.cluster_method is None:
                self.cluster_method = "kmeans"
        if self.rounds is not None:
            if self.rounds < 1:
                raise ValueError("rounds must be >= 1")
            if self.mode == "ist" and self.rounds < self.schedule.rounds + 1:
                raise ValueError(
                    f"ist needs rounds >= schedule.rounds + 1 = {self.schedule.rounds + 1} "
                    f"so every batch gets admitted"
                )

    def resolved_rounds(self) -> int:
        if self.rounds is not None:
            return self.rounds
        if self.mode == "ist":
            return self.schedule.rounds + 4
        raise ValueError("rounds must be set explicitly for st mode")


class PseudoPool:
    """Monotonically growing set of unlabeled ids eligible for pseudo-labeling."""

    def __init__(self):
        self._admitted_round: dict[int, int] = {}
        self.labels: dict[int, int] = {}
        self.confidence: dict[int, float] = {}

    def __len__(self) -> int:
        return len(self._admitted_round)

    def admit(self, ids, round_index: int) -> None:
        for i in ids:
            i = int(i)
            if i in self._admitted_round:
                raise ValueError(f"sample {i} already admitted")
            self._admitted_round[i] = round_index

    def member_ids_sorted(self) -> np.ndarray:
        return np.fromiter(sorted(self._admitted_round), dtype=np.int64,
                           count=len(self._admitted_round))

    def admitted_round(self, sample_id: int) -> int:
        return self._admitted_round[sample_id]


@dataclass
class TrainingTrajectory:
    """Per-round record of one training run plus totals.

    ``cum_seconds`` accumulates loop time (fit + predict + evaluate);
    clustering time is kept apart in ``cluster_seconds`` so reports can
    isolate it the way the benchmark tables do.
    """

    mode: str
    seed: int
    accuracy: list[float] = field(default_factory=list)
    pool_size: list[int] = field(default_factory=list)
    pseudo_used: list[int] = field(default_factory=list)
    pseudo_error: list[float | None] = field(default_factory=list)
    processed: list[int] = field(default_factory=list)
    cum_seconds: list[float] = field(default_factory=list)
    cluster_seconds: float = 0.0
    failed_round: int | None = None
    failure_message: str | None = None
    config_echo: dict = field(default_factory=dict)

    @property
    def rounds_completed(self) -> int:
        return len(self.accuracy)

    @property
    def final_accuracy(self) -> float | None:
        return self.accuracy[-1] if self.accuracy else None

    @property
    def total_processed(self) -> int:
        return int(sum(self.processed))

    @property
    def total_seconds(self) -> float:
        loop = self.cum_seconds[-1] if self.cum_seconds else 0.0
        return loop + self.cluster_seconds

    def deterministic_fields(self) -> dict:
        """Everything except wall-clock timing; the unit of reproducibility checks."""
        return {
            "mode": self.mode,
            "seed": self.seed,
            "accuracy": list(self.accuracy),
            "pool_size": list(self.pool_size),
            "pseudo_used": list(self.pseudo_used),
            "pseudo_error": list(self.pseudo_error),
            "processed": list(self.processed),
            "failed_round": self.failed_round,
        }

    def to_csv_text(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf)
        writer.writerow(["round", "accuracy", "pool_size", "pseudo_used",
                         "pseudo_error", "processed", "cum_seconds"])
        for t in range(self.rounds_completed):
            err = self.pseudo_error[t]
            writer.writerow([t, repr(self.accuracy[t]), self.pool_size[t],
                             self.pseudo_used[t], "" if err is None else repr(err),
                             self.processed[t], repr(self.cum_seconds[t])])
        return buf.getvalue()

    def to_csv(self, path: str) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            fh.write(self.to_csv_text())

    def summary(self, config_echo: dict | None = None) -> dict:
        return {
            "mode": self.mode,
            "seed": self.seed,
            "final_accuracy": self.final_accuracy,
            "rounds": self.rounds_completed,
            "total_processed": self.total_processed,
            "total_seconds": self.total_seconds,
            "cluster_seconds": self.cluster_seconds,
            "failed_round": self.failed_round,
            "failure_message": self.failure_message,
            "config": self.config_echo if config_echo is None else config_echo,
        }


def read_trajectory_csv(path: str) -> TrainingTrajectory:
    traj = TrainingTrajectory(mode="unknown", seed=-1)
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            traj.accuracy.append(float(row["accuracy"]))
            traj.pool_size.append(int(row["pool_size"]))
            traj.pseudo_used.append(int(row["pseudo_used"]))
            traj.pseudo_error.append(None if row["pseudo_error"] == ""
                                     else float(row["pseudo_error"]))
            traj.processed.append(int(row["processed"]))
            traj.cum_seconds.append(float(row["cum_seconds"]))
    return traj


def pseudo_label_pool(model: ClassifierModel, pool: PseudoPool, unlabeled: UnlabeledSet,
                      confidence_threshold: float, pseudo_weight: float = 1.0,
                      freeze_labels: bool = False):
    """Predict over the pool and keep members clearing the confidence threshold.

    Pool labels and confidences are refreshed from the current model on every
    call (unless frozen at first sight), including for members that fall
    below the threshold. Returns ids in ascending order so downstream
    training sees a canonical row order.
    """
    if len(pool) == 0:
        return (np.empty(0, dtype=np.int64), np.empty(0, dtype=np.int64),
                np.empty(0, dtype=np.float64))
    ids = pool.member_ids_sorted()
    pos = {int(v): i for i, v in enumerate(unlabeled.ids)}
    try:
        rows = np.fromiter((pos[int(i)] for i in ids), dtype=np.int64, count=len(ids))
    except KeyError as exc:
        raise ValueError(f"pool member {exc.args[0]} is not an unlabeled id") from None

    proba = model.predict_proba(unlabeled.features[rows])
    conf = proba.max(axis=1)
    labels = proba.argmax(axis=1)
    for i, sample_id in enumerate(ids):
        sid = int(sample_id)
        if freeze_labels and sid in pool.labels:
            continue
        pool.labels[sid] = int(labels[i])
        pool.confidence[sid] = float(conf[i])

    stored_conf = np.array([pool.confidence[int(i)] for i in ids])
    stored_labels = np.array([pool.labels[int(i)] for i in ids], dtype=np.int64)
    keep = stored_conf >= confidence_threshold
    selected = ids[keep]
    return (selected, stored_labels[keep],
            np.full(len(selected), pseudo_weight, dtype=np.float64))


def evaluate(model: ClassifierModel, test: Dataset) -> float:
    """Fraction of argmax predictions matching ground truth."""
    if test.n == 0:
        raise ValueError("test set is empty")
    if test.labels is None:
        raise ValueError("test set has no labels")
    return float(np.mean(model.predict(test.features) == test.labels))


def pseudo_error_rate(pool: PseudoPool, confidence_threshold: float,
                      truth_by_id: dict[int, int] | None) -> float | None:
    """Share of selected pseudo-labels disagreeing with hidden ground truth.

    Diagnostic only. Returns None when truth is unavailable or nothing is
    selected, to keep 'no data' distinct from 'no errors'.
    """
    if truth_by_id is None:
        return None
    selected = [i for i in sorted(pool.labels) if pool.confidence[i] >= confidence_threshold]
    if not selected:
        return None
    wrong = sum(1 for i in selected if pool.labels[i] != truth_by_id[i])
    return wrong / len(selected)


def _config_echo(cfg: SelfTrainConfig) -> dict:
    echo = {
        "mode": cfg.mode,
        "rounds": cfg.rounds,
        "confidence_threshold": cfg.confidence_threshold,
        "pseudo_weight": cfg.pseudo_weight,
        "certainty_norm": cfg.certainty_norm,
        "freeze_labels": cfg.freeze_labels,
        "seed": cfg.seed,
        "cluster_method": cfg.cluster_method,
    }
    if cfg.schedule is not None:
        echo["schedule"] = asdict(cfg.schedule)
    if cfg.cluster_config is not None:
        echo["cluster_config"] = asdict(cfg.cluster_config)
    return echo


def _run_rounds(labeled: LabeledSet, unlabeled: UnlabeledSet, test: Dataset,
                backbone: ClassifierModel, cfg: SelfTrainConfig, pool: PseudoPool,
                batches: list[list[int]] | None,
                cluster_seconds: float) -> tuple[ClassifierModel, TrainingTrajectory]:
    rounds = cfg.resolved_rounds()
    traj = TrainingTrajectory(mode=cfg.mode, seed=cfg.seed)
    traj.cluster_seconds = cluster_seconds
    traj.config_echo = _config_echo(cfg)
    eval_labels = unlabeled.eval_labels()
    truth = None if eval_labels is None else \
        {int(i): int(l) for i, l in zip(unlabeled.ids, eval_labels)}
    n_l = labeled.n_l
    pos = {int(v): i for i, v in enumerate(unlabeled.ids)}
    start = time.perf_counter()

    def record(acc: float, used: int, err: float | None):
        traj.accuracy.append(acc)
        traj.pool_size.append(len(pool))
        traj.pseudo_used.append(used)
        traj.pseudo_error.append(err)
        traj.processed.append(n_l + used)
        traj.cum_seconds.append(time.perf_counter() - start)

    try:
        backbone.fit(labeled.features, labeled.labels, np.ones(n_l))
    except ValueError as exc:
        traj.failed_round, traj.failure_message = 0, str(exc)
        raise TrainingRoundError(0, traj, str(exc)) from exc
    record(evaluate(backbone, test), 0, None)

    for t in range(1, rounds):
        if batches is not None and t < len(batches):
            pool.admit(batches[t], t)
        sel_ids, sel_labels, sel_weights = pseudo_label_pool(
            backbone, pool, unlabeled, cfg.confidence_threshold,
            cfg.pseudo_weight, cfg.freeze_labels)
        rows = np.fromiter((pos[int(i)] for i in sel_ids), dtype=np.int64,
                           count=len(sel_ids))
        X = np.vstack([labeled.features, unlabeled.features[rows]])
        y = np.concatenate([labeled.labels, sel_labels])
        w = np.concatenate([np.ones(n_l), sel_weights])
        try:
            backbone.fit(X, y, w)
        except ValueError as exc:
            traj.failed_round, traj.failure_message = t, str(exc)
            raise TrainingRoundError(t, traj, str(exc)) from exc
        err = pseudo_error_rate(pool, cfg.confidence_threshold, truth)
        record(evaluate(backbone, test), len(sel_ids), err)

    return backbone, traj


def st_train(labeled: LabeledSet, unlabeled: UnlabeledSet, test: Dataset,
             backbone: ClassifierModel,
             cfg: SelfTrainConfig) -> tuple[ClassifierModel, TrainingTrajectory]:
    """Classical self-training: the whole unlabeled set is the pool from the start."""
    if cfg.mode != "st":
        raise ValueError("st_train requires cfg.mode == 'st'")
    pool = PseudoPool()
    pool.admit(sorted(int(i) for i in unlabeled.ids), 0)
    return _run_rounds(labeled, unlabeled, test, backbone, cfg, pool, None, 0.0)


def ist_train(labeled: LabeledSet, unlabeled: UnlabeledSet, test: Dataset,
              backbone: ClassifierModel,
              cfg: SelfTrainConfig) -> tuple[ClassifierModel, TrainingTrajectory]:
    """Incremental self-training: cluster once, order by certainty, admit in batches.

    Initialization standardizes the unlabeled features, fits the configured
    clustering method a single time, builds the query list, and partitions it;
    batch 0 seeds the pool. Batch t is admitted at round t until the schedule
    is exhausted, after which the pool stays complete and training continues.
    """
    if cfg.mode != "ist":
        raise ValueError("ist_train requires cfg.mode == 'ist'")
    cfg.resolved_rounds()

    scaled, _ = standardize(unlabeled.features)
    cluster_cfg = cfg.cluster_config
    if cluster_cfg is not None:
        # cluster counts left unset default to the class count
        if getattr(cluster_cfg, "k", "absent") is None:
            cluster_cfg.k = labeled.class_count
        if getattr(cluster_cfg, "global_k", "absent") is None:
            cluster_cfg.global_k = labeled.class_count
    model = fit_cluster(cfg.cluster_method, scaled, cluster_cfg,
                        k=labeled.class_count, seed=cfg.seed)
    qlist = build_query_list(model, unlabeled, cfg.certainty_norm)
    batches = partition_batches(qlist, cfg.schedule)

    pool = PseudoPool()
    pool.admit(batches[0], 0)
    return _run_rounds(labeled, unlabeled, test, backbone, cfg, pool, batches,
                       model.fit_seconds)
