"""Certainty-sorted query list over the unlabeled set and its batch partition.

The list is built exactly once from a fitted cluster model; every batch is a
contiguous slice of it, so earlier batches always hold the easier (closer to
a centroid) samples.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .clustering import ClusterModel
from .data import UnlabeledSet

CERTAINTY_NORMS = ("global", "per_cluster_rank")


@dataclass(frozen=True)
class CertaintyEntry:
    sample_id: int
    cluster: int
    distance: float
    certainty: float


@dataclass(frozen=True)
class QueryList:
    entries: tuple[CertaintyEntry, ...]
    built_from: str

    def __len__(self) -> int:
        return len(self.entries)

    def sample_ids(self) -> list[int]:
        return [e.sample_id for e in self.entries]

    def to_csv(self, path: str) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["sample_id", "cluster", "distance"])
            for e in self.entries:
                writer.writerow([e.sample_id, e.cluster, repr(e.distance)])


def read_query_list_csv(path: str, built_from: str = "unknown") -> QueryList:
    entries = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            d = float(row["distance"])
            entries.append(CertaintyEntry(int(row["sample_id"]), int(row["cluster"]), d, -d))
    return QueryList(tuple(entries), built_from)


@dataclass(frozen=True)
class BatchSchedule:
    """How the sorted list is cut: an initial fraction plus T follow-up batches."""

    initial_fraction: float = 0.2
    rounds: int = 8
    growth: str = "equal"

    def __post_init__(self):
        if not 0.0 < self.initial_fraction <= 1.0:
            raise ValueError("initial_fraction must be in (0, 1]")
        if self.rounds < 0:
            raise ValueError("rounds must be >= 0")
        if self.growth not in ("equal", "geometric"):
            raise ValueError(f"unknown growth {self.growth!r}")


def build_query_list(model: ClusterModel, unlabeled: UnlabeledSet,
                     certainty_norm: str = "global") -> QueryList:
    """Sort the unlabeled ids by certainty, most certain first.

    ``global`` ranks by raw centroid distance across all clusters;
    ``per_cluster_rank`` ranks by within-cluster distance rank scaled by
    cluster size, which interleaves clusters of unequal spread. Ties break
    toward the lower sample id either way.
    """
    if certainty_norm not in CERTAINTY_NORMS:
        raise ValueError(f"unknown certainty_norm {certainty_norm!r}")
    if model.assignments is None or model.distances is None:
        raise ValueError("cluster model carries no assignments; fit or assign it first")
    if len(model.assignments) != unlabeled.n_u:
        raise ValueError(
            f"cluster model covers {len(model.assignments)} rows but the unlabeled "
            f"set has {unlabeled.n_u}; fit the model on exactly the unlabeled rows"
        )

    ids = unlabeled.ids
    clusters = np.asarray(model.assignments)
    distances = np.asarray(model.distances, dtype=np.float64)

    if certainty_norm == "global":
        certainty = -distances
    else:
        certainty = np.empty(unlabeled.n_u, dtype=np.float64)
        for c in np.unique(clusters):
            members = np.flatnonzero(clusters == c)
            order = np.lexsort((ids[members], distances[members]))
            ranks = np.empty(len(members), dtype=np.float64)
            ranks[order] = np.arange(len(members), dtype=np.float64)
            certainty[members] = -ranks / len(members)

    order = np.lexsort((ids, -certainty))
    entries = tuple(
        CertaintyEntry(int(ids[i]), int(clusters[i]), float(distances[i]), float(certainty[i]))
        for i in order
    )
    return QueryList(entries, model.method)


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def partition_batches(qlist: QueryList, schedule: BatchSchedule) -> list[list[int]]:
    """Cut the list into T+1 contiguous batches; rounding leftovers land on the last one."""
    n = len(qlist)
    ids = qlist.sample_ids()
    t_rounds = schedule.rounds
    if t_rounds == 0:
        return [ids]

    first = min(_round_half_up(schedule.initial_fraction * n), n)
    remaining = n - first
    if schedule.growth == "equal":
        weights = [1.0] * t_rounds
    else:
        weights = [2.0 ** t for t in range(t_rounds)]
    total_w = sum(weights)
    sizes = [first]
    used = 0
    for t in range(t_rounds - 1):
        s = int(remaining * weights[t] / total_w)
        sizes.append(s)
        used += s
    sizes.append(remaining - used)

    batches = []
    cursor = 0
    for s in sizes:
        batches.append(ids[cursor:cursor + s])
        cursor += s
    return batches


def pool_at(batches: list[list[int]], t: int) -> set[int]:
    """Pool membership after round t: the union of batches 0..t."""
    if not 0 <= t < len(batches):
        raise ValueError(f"round {t} out of range [0, {len(batches) - 1}]")
    out: set[int] = set()
    for b in batches[:t + 1]:
        out.update(b)
    return out
