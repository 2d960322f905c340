"""Centroid-style clustering backends sharing one model interface.

Four methods are implemented: Lloyd k-means, mini-batch k-means, flat-kernel
mean shift, and a CF-tree BIRCH with a k-means global step. Each fit returns
a :class:`ClusterModel` whose per-point centroid distances downstream code
uses as a certainty score. Further methods can be plugged in by producing a
ClusterModel with synthesized per-cluster centroids.

All distances are plain Euclidean in whatever feature space the caller
supplies; this module never rescales its input.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field

import numpy as np

METHODS = ("kmeans", "minibatch_kmeans", "meanshift", "birch")

_FIT_CALLS = 0  # counts top-level fit_cluster dispatches, for instrumentation


@dataclass
class ClusterModel:
    """Fitted clustering: centroids plus per-point assignment and distance.

    ``inertia_history`` records the inertia after every assignment pass for
    iterative fits (k-means); it is diagnostic and not serialized.
    """

    method: str
    centroids: np.ndarray
    assignments: np.ndarray | None
    distances: np.ndarray | None
    inertia: float
    fit_seconds: float
    inertia_history: list[float] = field(default_factory=list)

    @property
    def k(self) -> int:
        return self.centroids.shape[0]

    def validate(self, X: np.ndarray | None = None) -> None:
        """Check the structural invariants; raises AssertionError on violation."""
        assert self.assignments is not None and self.distances is not None
        assert self.assignments.min() >= 0 and self.assignments.max() < self.k
        assert self.inertia >= 0
        recomputed = float(np.sum(self.distances * self.distances))
        assert abs(recomputed - self.inertia) <= 1e-6 * max(recomputed, 1e-300)
        if X is not None:
            ref = np.sqrt(((X - self.centroids[self.assignments]) ** 2).sum(-1))
            assert np.max(np.abs(ref - self.distances)) <= 1e-9

    def to_json(self) -> str:
        doc = {
            "method": self.method,
            "centroids": self.centroids.tolist(),
            "inertia": float(self.inertia),
            "fit_seconds": float(self.fit_seconds),
        }
        return json.dumps(doc)

    @classmethod
    def from_json(cls, text: str) -> "ClusterModel":
        doc = json.loads(text)
        return cls(
            method=doc["method"],
            centroids=np.asarray(doc["centroids"], dtype=np.float64),
            assignments=None,
            distances=None,
            inertia=float(doc["inertia"]),
            fit_seconds=float(doc["fit_seconds"]),
        )


@dataclass
class KMeansConfig:
    k: int | None = None
    max_iter: int = 300
    tol: float = 1e-4
    init: str = "kmeanspp"
    seed: int = 0

    def __post_init__(self):
        if self.k is not None and self.k < 1:
            raise ValueError("k must be >= 1")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if self.tol < 0:
            raise ValueError("tol must be >= 0")
        if self.init not in ("kmeanspp", "random"):
            raise ValueError(f"unknown init {self.init!r}")


@dataclass
class MiniBatchKMeansConfig(KMeansConfig):
    batch_size: int = 256
    max_no_improve: int = 10

    def __post_init__(self):
        super().__post_init__()
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.max_no_improve < 1:
            raise ValueError("max_no_improve must be >= 1")


@dataclass
class MeanShiftConfig:
    bandwidth: float | None = None
    merge_tol: float = 0.5
    max_iter: int = 300
    subsample: int = 1000
    shift_subsample: int | None = 1000
    seed: int = 0

    def __post_init__(self):
        if self.bandwidth is not None and self.bandwidth <= 0:
            raise ValueError("bandwidth must be > 0 when given")


@dataclass
class BirchConfig:
    branching_factor: int = 50
    threshold: float | None = None
    global_k: int | None = None
    seed: int = 0

    def __post_init__(self):
        if self.branching_factor < 2:
            raise ValueError("branching_factor must be >= 2")
        if self.threshold is not None and self.threshold <= 0:
            raise ValueError("threshold must be > 0 once resolved")


def _sq_dists_to(rows: np.ndarray, X: np.ndarray) -> np.ndarray:
    """Squared distances from each row to every point of X, via the gram identity.

    Avoids materializing a (rows, n, d) cube; tiny negative round-off is
    clipped. Good for neighborhood thresholding, not for exact tie-breaking.
    """
    d2 = (rows * rows).sum(1)[:, None] + (X * X).sum(1)[None, :] - 2.0 * (rows @ X.T)
    np.maximum(d2, 0.0, out=d2)
    return d2


def _nearest(X: np.ndarray, centroids: np.ndarray, chunk: int = 2048):
    """Nearest centroid per row, ties to the lowest centroid index."""
    n = X.shape[0]
    assignments = np.empty(n, dtype=np.int64)
    distances = np.empty(n, dtype=np.float64)
    for start in range(0, n, chunk):
        rows = X[start:start + chunk]
        d2 = ((rows[:, None, :] - centroids[None, :, :]) ** 2).sum(-1)
        a = np.argmin(d2, axis=1)
        assignments[start:start + chunk] = a
        distances[start:start + chunk] = np.sqrt(d2[np.arange(len(rows)), a])
    return assignments, distances


def assign(model: ClusterModel, X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Map rows of X onto the model's centroids."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != model.centroids.shape[1]:
        raise ValueError(
            f"dimension mismatch: model has {model.centroids.shape[1]} features, "
            f"input has {X.shape[1] if X.ndim == 2 else '?'}"
        )
    return _nearest(X, model.centroids)


def _init_centroids(X: np.ndarray, k: int, init: str, rng: np.random.Generator) -> np.ndarray:
    n = X.shape[0]
    if init == "random":
        return X[rng.choice(n, size=k, replace=False)].copy()
    # k-means++: seed proportional to squared distance from the chosen set
    centroids = np.empty((k, X.shape[1]), dtype=np.float64)
    centroids[0] = X[rng.integers(n)]
    closest = ((X - centroids[0]) ** 2).sum(-1)
    for j in range(1, k):
        total = closest.sum()
        if total <= 0:
            idx = int(rng.integers(n))
        else:
            idx = int(rng.choice(n, p=closest / total))
        centroids[j] = X[idx]
        closest = np.minimum(closest, ((X - centroids[j]) ** 2).sum(-1))
    return centroids


def _mean_update(X: np.ndarray, assignments: np.ndarray, distances: np.ndarray,
                 centroids: np.ndarray) -> np.ndarray:
    """Cluster-mean step; empty clusters are reseeded at the farthest point."""
    k = centroids.shape[0]
    new = centroids.copy()
    counts = np.bincount(assignments, minlength=k)
    for j in range(k):
        if counts[j] > 0:
            new[j] = X[assignments == j].mean(axis=0)
    if np.any(counts == 0):
        taken = distances.copy()
        for j in np.flatnonzero(counts == 0):
            far = int(np.argmax(taken))
            new[j] = X[far]
            taken[far] = -1.0
    return new


def kmeans_fit(X: np.ndarray, cfg: KMeansConfig) -> ClusterModel:
    """Lloyd's algorithm with k-means++ (default) or random init."""
    t0 = time.perf_counter()
    X = np.asarray(X, dtype=np.float64)
    if cfg.k is None:
        raise ValueError("k is unresolved; set KMeansConfig.k")
    k = cfg.k
    if X.shape[0] < k:
        raise ValueError(f"need at least k={k} points, got {X.shape[0]}")
    rng = np.random.default_rng(cfg.seed)

    centroids = _init_centroids(X, k, cfg.init, rng)
    assignments, distances = _nearest(X, centroids)
    inertia = float(np.sum(distances * distances))
    history = [inertia]
    for _ in range(cfg.max_iter):
        centroids = _mean_update(X, assignments, distances, centroids)
        assignments, distances = _nearest(X, centroids)
        new_inertia = float(np.sum(distances * distances))
        history.append(new_inertia)
        improvement = inertia - new_inertia
        done = inertia <= 0 or improvement <= cfg.tol * inertia
        inertia = new_inertia
        if done:
            break

    return ClusterModel("kmeans", centroids, assignments, distances, inertia,
                        time.perf_counter() - t0, history)


def minibatch_kmeans_fit(X: np.ndarray, cfg: MiniBatchKMeansConfig) -> ClusterModel:
    """Mini-batch k-means with per-center 1/count step sizes.

    Within one batch the sequential per-sample updates for a center telescope
    to ``(count * center + batch_sum) / (count + batch_members)``, which is
    what gets applied. Stops once the smoothed per-point batch inertia fails
    to improve for ``max_no_improve`` consecutive batches.
    """
    t0 = time.perf_counter()
    X = np.asarray(X, dtype=np.float64)
    if cfg.k is None:
        raise ValueError("k is unresolved; set KMeansConfig.k")
    k = cfg.k
    n = X.shape[0]
    if n < k:
        raise ValueError(f"need at least k={k} points, got {n}")
    rng = np.random.default_rng(cfg.seed)

    centroids = _init_centroids(X, k, cfg.init, rng)
    counts = np.zeros(k, dtype=np.float64)
    batch = min(cfg.batch_size, n)
    smoothed = None
    best = np.inf
    stale = 0
    for _ in range(cfg.max_iter):
        idx = rng.choice(n, size=batch, replace=False) if batch < n else np.arange(n)
        rows = X[idx]
        a, d = _nearest(rows, centroids)
        mse = float(np.mean(d * d))
        smoothed = mse if smoothed is None else 0.7 * smoothed + 0.3 * mse

        members = np.bincount(a, minlength=k).astype(np.float64)
        sums = np.zeros_like(centroids)
        for j in np.flatnonzero(members):
            sums[j] = rows[a == j].sum(axis=0)
            centroids[j] = (counts[j] * centroids[j] + sums[j]) / (counts[j] + members[j])
        counts += members

        if smoothed < best:
            best = smoothed
            stale = 0
        else:
            stale += 1
            if stale >= cfg.max_no_improve:
                break

    assignments, distances = _nearest(X, centroids)
    inertia = float(np.sum(distances * distances))
    return ClusterModel("minibatch_kmeans", centroids, assignments, distances, inertia,
                        time.perf_counter() - t0)


def estimate_bandwidth(X: np.ndarray, quantile: float = 0.3, subsample: int = 1000,
                       seed: int = 0) -> float:
    """Quantile of pairwise Euclidean distances over a subsample of rows."""
    X = np.asarray(X, dtype=np.float64)
    n = X.shape[0]
    if n < 2:
        raise ValueError("need at least two points to estimate a bandwidth")
    if not 0.0 < quantile <= 1.0:
        raise ValueError("quantile must be in (0, 1]")
    if n > subsample:
        rng = np.random.default_rng(seed)
        X = X[rng.choice(n, size=subsample, replace=False)]
        n = subsample

    dists = []
    for i in range(0, n, 256):
        rows = X[i:i + 256]
        d2 = _sq_dists_to(rows, X)
        for r in range(len(rows)):
            dists.append(np.sqrt(d2[r, i + r + 1:]))
    flat = np.concatenate(dists) if dists else np.empty(0)
    if flat.size == 0 or flat.max() == 0.0:
        raise ValueError("all points identical; bandwidth is undefined")
    bw = float(np.quantile(flat, quantile))
    if bw == 0.0:
        bw = float(flat[flat > 0].min())
    return bw


def meanshift_fit(X: np.ndarray, cfg: MeanShiftConfig) -> ClusterModel:
    """Flat-kernel mean shift: iterate seeds to local neighborhood means, then merge modes."""
    t0 = time.perf_counter()
    X = np.asarray(X, dtype=np.float64)
    n = X.shape[0]
    if n < 1:
        raise ValueError("need at least one point")
    bandwidth = cfg.bandwidth
    if bandwidth is None:
        bandwidth = estimate_bandwidth(X, 0.3, cfg.subsample, cfg.seed)

    rng = np.random.default_rng(cfg.seed)
    if cfg.shift_subsample is not None and n > cfg.shift_subsample:
        seeds = X[rng.choice(n, size=cfg.shift_subsample, replace=False)].copy()
    else:
        seeds = X.copy()

    stop = 1e-3 * bandwidth
    active = np.ones(len(seeds), dtype=bool)
    for _ in range(cfg.max_iter):
        if not active.any():
            break
        moving = np.flatnonzero(active)
        for start in range(0, len(moving), 256):
            sel = moving[start:start + 256]
            d2 = _sq_dists_to(seeds[sel], X)
            within = d2 <= bandwidth * bandwidth
            hits = within.sum(axis=1)
            means = seeds[sel].copy()
            nz = hits > 0
            means[nz] = (within[nz].astype(np.float64) @ X) / hits[nz, None]
            moved = np.sqrt(((means - seeds[sel]) ** 2).sum(-1))
            seeds[sel] = means
            active[sel] = moved >= stop

    centroids = _merge_modes(seeds, X, bandwidth, cfg.merge_tol)
    assignments, distances = _nearest(X, centroids)
    inertia = float(np.sum(distances * distances))
    return ClusterModel("meanshift", centroids, assignments, distances, inertia,
                        time.perf_counter() - t0)


def _merge_modes(modes: np.ndarray, X: np.ndarray, bandwidth: float,
                 merge_tol: float) -> np.ndarray:
    """Suppress near-duplicate modes, keeping better-supported ones first.

    Greedy by descending neighborhood support (ties by index), so the kept
    set is pairwise farther apart than ``merge_tol * bandwidth`` and
    re-merging it is a no-op.
    """
    support = np.empty(len(modes), dtype=np.int64)
    for start in range(0, len(modes), 256):
        d2 = _sq_dists_to(modes[start:start + 256], X)
        support[start:start + 256] = (d2 <= bandwidth * bandwidth).sum(axis=1)
    order = np.lexsort((np.arange(len(modes)), -support))
    radius = merge_tol * bandwidth
    kept: list[np.ndarray] = []
    for i in order:
        m = modes[i]
        if all(np.sqrt(((m - c) ** 2).sum()) > radius for c in kept):
            kept.append(m)
    return np.asarray(kept)


class _CFEntry:
    """One clustering feature: running count, linear sum, squared-norm sum."""

    __slots__ = ("count", "ls", "ss", "point_ids", "child")

    def __init__(self, dim: int, child: "_CFNode | None" = None):
        self.count = 0
        self.ls = np.zeros(dim, dtype=np.float64)
        self.ss = 0.0
        self.point_ids: list[int] = []
        self.child = child

    def centroid(self) -> np.ndarray:
        return self.ls / self.count

    def absorb(self, x: np.ndarray, pid: int | None) -> None:
        self.count += 1
        self.ls = self.ls + x
        self.ss = self.ss + float(x @ x)
        if pid is not None:
            self.point_ids.append(pid)

    def radius_if_absorbed(self, x: np.ndarray) -> float:
        n = self.count + 1
        ls = self.ls + x
        ss = self.ss + float(x @ x)
        c = ls / n
        return float(np.sqrt(max(ss / n - float(c @ c), 0.0)))

    def add_entry(self, other: "_CFEntry") -> None:
        self.count += other.count
        self.ls = self.ls + other.ls
        self.ss = self.ss + other.ss


class _CFNode:
    __slots__ = ("entries", "is_leaf")

    def __init__(self, is_leaf: bool):
        self.entries: list[_CFEntry] = []
        self.is_leaf = is_leaf


class CFTree:
    """Single-pass clustering-feature tree used by :func:`birch_fit`."""

    def __init__(self, threshold: float, branching_factor: int, dim: int):
        self.threshold = threshold
        self.branching = branching_factor
        self.dim = dim
        self.root = _CFNode(is_leaf=True)

    def insert(self, x: np.ndarray, pid: int) -> None:
        split = self._insert(self.root, x, pid)
        if split is not None:
            self.root = _CFNode(is_leaf=False)
            self.root.entries = list(split)

    def _insert(self, node: _CFNode, x: np.ndarray, pid: int):
        if node.is_leaf:
            if node.entries:
                d2 = np.array([((e.centroid() - x) ** 2).sum() for e in node.entries])
                best = node.entries[int(np.argmin(d2))]
                if best.radius_if_absorbed(x) <= self.threshold:
                    best.absorb(x, pid)
                    return None
            fresh = _CFEntry(self.dim)
            fresh.absorb(x, pid)
            node.entries.append(fresh)
        else:
            d2 = np.array([((e.centroid() - x) ** 2).sum() for e in node.entries])
            chosen = node.entries[int(np.argmin(d2))]
            split = self._insert(chosen.child, x, pid)
            if split is None:
                chosen.absorb(x, None)
                return None
            node.entries.remove(chosen)
            node.entries.extend(split)
        if len(node.entries) > self.branching:
            return self._split(node)
        return None

    def _split(self, node: _CFNode):
        """Farthest-pair seeding; each entry joins the nearer seed's half."""
        cents = np.array([e.centroid() for e in node.entries])
        d2 = ((cents[:, None, :] - cents[None, :, :]) ** 2).sum(-1)
        i, j = np.unravel_index(int(np.argmax(d2)), d2.shape)
        halves = (_CFNode(node.is_leaf), _CFNode(node.is_leaf))
        for idx, e in enumerate(node.entries):
            side = 0 if d2[idx, i] <= d2[idx, j] else 1
            halves[side].entries.append(e)
        if not halves[1].entries:
            halves[1].entries.append(halves[0].entries.pop())
        summaries = []
        for half in halves:
            s = _CFEntry(self.dim, child=half)
            for e in half.entries:
                s.add_entry(e)
            summaries.append(s)
        return tuple(summaries)

    def leaf_entries(self) -> list[_CFEntry]:
        out: list[_CFEntry] = []
        stack = [self.root]
        while stack:
            node = stack.pop(0)
            if node.is_leaf:
                out.extend(node.entries)
            else:
                stack = [e.child for e in node.entries] + stack
        return out


def birch_fit(X: np.ndarray, cfg: BirchConfig) -> ClusterModel:
    """BIRCH: CF-tree condensation followed by k-means over leaf-entry centroids."""
    t0 = time.perf_counter()
    X = np.asarray(X, dtype=np.float64)
    n = X.shape[0]
    if cfg.global_k is None:
        raise ValueError("global_k is unresolved; set BirchConfig.global_k")
    global_k = cfg.global_k
    if n < global_k:
        raise ValueError(f"need at least global_k={global_k} points, got {n}")
    threshold = cfg.threshold
    if threshold is None:
        threshold = 0.5 * estimate_bandwidth(X, 0.1, 1000, cfg.seed)

    tree = CFTree(threshold, cfg.branching_factor, X.shape[1])
    for i in range(n):
        tree.insert(X[i], i)
    entries = tree.leaf_entries()
    if len(entries) < global_k:
        raise ValueError(
            f"CF tree produced {len(entries)} leaf entries < global_k={global_k}; "
            f"decrease threshold"
        )
    condensed = np.array([e.centroid() for e in entries])
    global_model = kmeans_fit(condensed, KMeansConfig(k=global_k, seed=cfg.seed))

    assignments, distances = _nearest(X, global_model.centroids)
    inertia = float(np.sum(distances * distances))
    return ClusterModel("birch", global_model.centroids, assignments, distances, inertia,
                        time.perf_counter() - t0)


def default_config(method: str, k: int | None = None, seed: int = 0):
    if method == "kmeans":
        return KMeansConfig(k=k, seed=seed)
    if method == "minibatch_kmeans":
        return MiniBatchKMeansConfig(k=k, seed=seed)
    if method == "meanshift":
        return MeanShiftConfig(seed=seed)
    if method == "birch":
        return BirchConfig(global_k=k, seed=seed)
    raise ValueError(f"unknown clustering method {method!r}; implemented: {METHODS}")


def fit_cluster(method: str, X: np.ndarray, cfg=None, k: int | None = None,
                seed: int = 0) -> ClusterModel:
    """Dispatch a fit by method tag. Every call is counted for instrumentation."""
    global _FIT_CALLS
    _FIT_CALLS += 1
    if cfg is None:
        cfg = default_config(method, k=k, seed=seed)
    if method == "kmeans":
        return kmeans_fit(X, cfg)
    if method == "minibatch_kmeans":
        return minibatch_kmeans_fit(X, cfg)
    if method == "meanshift":
        return meanshift_fit(X, cfg)
    if method == "birch":
        return birch_fit(X, cfg)
    raise ValueError(f"unknown clustering method {method!r}; implemented: {METHODS}")


def fit_call_count() -> int:
    return _FIT_CALLS
