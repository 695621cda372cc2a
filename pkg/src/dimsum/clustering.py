"""Mini-batch k-means over complete windows and a Davies-Bouldin-guided
binary search for the cluster count."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .core import ContractViolation, SeriesWindow, derive_rng

log = logging.getLogger(__name__)

DEFAULT_BATCH_SIZE = 1024


@dataclass(frozen=True)
class ClusterModel:
    """Fitted centroids plus full-corpus assignment statistics.

    sigma[i] is the mean Euclidean distance of cluster i's members to their
    centroid; centroid_dists is the symmetric pairwise centroid distance
    matrix. Both are computed by a full pass with fixed centroids, so they
    are invariant under duplicating every point.
    """

    k: int
    centroids: np.ndarray  # (k, w)
    assignments: dict[str, int]  # window key -> cluster index
    sigma: np.ndarray  # (k,)
    centroid_dists: np.ndarray  # (k, k)
    seed: int

    def members(self, cluster: int) -> list[str]:
        return sorted(key for key, c in self.assignments.items() if c == cluster)


def window_matrix(windows: list[SeriesWindow]) -> np.ndarray:
    """Stack complete windows into an (n, w) matrix."""
    for w in windows:
        if not w.is_complete:
            raise ContractViolation(f"window {w.key} is incomplete; clustering needs D+")
    return np.stack([w.values for w in windows])


def _apply_batch(
    centroids: np.ndarray,
    counts: np.ndarray,
    batch: np.ndarray,
    labels: np.ndarray,
) -> None:
    """Move each touched centroid to the running mean of every point it has
    ever won. Equivalent to the sequential per-point 1/count update, but
    order-independent within the batch."""
    batch_counts = np.bincount(labels, minlength=centroids.shape[0])
    for c in np.flatnonzero(batch_counts):
        m = int(batch_counts[c])
        batch_sum = batch[labels == c].sum(axis=0)
        v0 = counts[c]
        centroids[c] = (v0 * centroids[c] + batch_sum) / (v0 + m)
        counts[c] += m


def _assign_labels(X: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    """Nearest centroid per row; ties break toward the lowest index."""
    # chunked to bound memory on large corpora
    n = X.shape[0]
    labels = np.empty(n, dtype=np.int64)
    step = max(1, 2_000_000 // max(1, centroids.shape[0] * X.shape[1]))
    for lo in range(0, n, step):
        chunk = X[lo : lo + step]
        d2 = ((chunk[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
        labels[lo : lo + step] = np.argmin(d2, axis=1)
    return labels


def finalize_model(
    centroids: np.ndarray, windows: list[SeriesWindow], seed: int
) -> ClusterModel:
    """Full assignment pass with fixed centroids; reseats empty clusters on
    the point farthest from its nearest centroid until none are empty."""
    X = window_matrix(windows)
    k = centroids.shape[0]
    if X.shape[0] < k:
        raise ContractViolation(
            f"need at least k={k} complete windows, got {X.shape[0]}; lower k_max"
        )
    centroids = centroids.copy()
    for _ in range(k + 1):
        labels = _assign_labels(X, centroids)
        counts = np.bincount(labels, minlength=k)
        empties = np.flatnonzero(counts == 0)
        if empties.size == 0:
            break
        # distance of each point to its assigned centroid
        dist = np.linalg.norm(X - centroids[labels], axis=1)
        order = np.argsort(-dist, kind="stable")
        for slot, cluster in enumerate(empties):
            centroids[cluster] = X[order[slot]]
    else:
        raise ContractViolation("could not populate every cluster; data may be degenerate")

    sigma = np.zeros(k)
    for c in range(k):
        member_rows = X[labels == c]
        sigma[c] = float(np.linalg.norm(member_rows - centroids[c], axis=1).mean())
    diffs = centroids[:, None, :] - centroids[None, :, :]
    dists = np.sqrt((diffs**2).sum(axis=2))
    assignments = {w.key: int(c) for w, c in zip(windows, labels)}
    return ClusterModel(k, centroids, assignments, sigma, dists, seed)


def _maximin_init(X: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """Farthest-first traversal from a seeded starting point.

    Each next center is the point farthest from every already-chosen one, so
    well-separated groups all receive an initial center instead of gambling
    on a uniform draw landing in each of them."""
    chosen = [int(rng.integers(X.shape[0]))]
    d2 = ((X - X[chosen[0]]) ** 2).sum(axis=1)
    while len(chosen) < k:
        nxt = int(np.argmax(d2))
        chosen.append(nxt)
        d2 = np.minimum(d2, ((X - X[nxt]) ** 2).sum(axis=1))
    return X[chosen].astype(np.float64).copy()


def minibatch_kmeans(
    windows: list[SeriesWindow],
    k: int,
    batch_size: int = DEFAULT_BATCH_SIZE,
    iters: int | None = None,
    seed: int = 0,
) -> ClusterModel:
    """Streaming k-means with per-center learning rate 1/count.

    Each batch moves every touched centroid to the running mean of all points
    it has ever won, which matches the sequential per-point update exactly
    but is order-independent within a batch. Deterministic under the seed.
    """
    if k < 2:
        raise ContractViolation("k must be at least 2")
    X = window_matrix(windows)
    n = X.shape[0]
    if n < k:
        raise ContractViolation(
            f"need at least k={k} complete windows, got {n}; lower k_max"
        )
    if iters is None:
        iters = 100 * k
    rng = derive_rng(seed, "kmeans", k)
    centroids = _maximin_init(X, k, rng)
    counts = np.zeros(k, dtype=np.int64)
    for _ in range(iters):
        idx = rng.integers(0, n, size=min(batch_size, n))
        batch = X[idx]
        d2 = ((batch[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
        labels = np.argmin(d2, axis=1)
        _apply_batch(centroids, counts, batch, labels)
        batch_counts = np.bincount(labels, minlength=k)
        untouched = np.flatnonzero((batch_counts == 0) & (counts == 0))
        if untouched.size:
            # centers that never won a point restart at the batch point
            # farthest from its nearest current centroid
            far = np.sqrt(d2.min(axis=1))
            order = np.argsort(-far, kind="stable")
            for slot, c in enumerate(untouched[: len(order)]):
                centroids[c] = batch[order[slot]]
    return finalize_model(centroids, windows, seed)


def davies_bouldin(model: ClusterModel) -> float:
    """Mean over clusters of the worst (sigma_i + sigma_j) / d_ij ratio;
    lower is better. Coincident centroids yield +inf with a warning."""
    k = model.k
    if k < 2:
        raise ContractViolation("Davies-Bouldin needs at least 2 clusters")
    worst = np.zeros(k)
    for i in range(k):
        ratios = []
        for j in range(k):
            if i == j:
                continue
            d = model.centroid_dists[i, j]
            if d == 0.0:
                log.warning("coincident centroids %d and %d; index is +inf", i, j)
                return float("inf")
            ratios.append((model.sigma[i] + model.sigma[j]) / d)
        worst[i] = max(ratios)
    return float(worst.mean())


def find_optimal_k(
    windows: list[SeriesWindow],
    k_min: int,
    k_max: int,
    seed: int = 0,
    batch_size: int = DEFAULT_BATCH_SIZE,
    iters: int | None = None,
) -> tuple[int, ClusterModel]:
    """Binary search of the Davies-Bouldin score over [k_min, k_max].

    Evaluates the endpoints and successive midpoints, keeping the half whose
    endpoint scores lower. Every evaluated k is memoized and the global
    argmin among them is returned, so the result is never worse than the
    plain bisection heuristic.
    """
    if not (2 <= k_min < k_max):
        raise ContractViolation("need 2 <= k_min < k_max")
    if k_max > len(windows):
        raise ContractViolation("k_max cannot exceed the number of complete windows")

    scores: dict[int, float] = {}
    models: dict[int, ClusterModel] = {}

    def evaluate(k: int) -> float:
        if k not in scores:
            model = minibatch_kmeans(windows, k, batch_size=batch_size, iters=iters, seed=seed)
            models[k] = model
            scores[k] = davies_bouldin(model)
        return scores[k]

    lo, hi = k_min, k_max
    evaluate(lo)
    evaluate(hi)
    while hi - lo > 1:
        mid = (lo + hi) // 2
        evaluate(mid)
        if scores[lo] <= scores[hi]:
            hi = mid
        else:
            lo = mid
    k_star = min(scores, key=lambda k: (scores[k], k))
    return k_star, models[k_star]
