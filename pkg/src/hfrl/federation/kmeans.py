"""Deterministic k-means for grouping agents by their parameter vectors.

Lloyd's algorithm with greedy farthest-point seeding and a fixed number of
restarts.  Every tie (nearest center, farthest point, best restart) breaks
toward the lowest index, and the only randomness is the seeded choice of
the first center per restart, so results are reproducible bit for bit.

Two-way clustering of a handful of points skips Lloyd's entirely: with
``k=2`` and at most :data:`EXACT_BIPARTITION_MAX_N` points every bipartition
is scored directly, so the returned WCSS is the global optimum rather than
a local one.  Restart-based search resumes beyond that size.

Labels are canonicalised by order of first appearance: the cluster that
contains the lowest-indexed point is labelled 0, the next new cluster 1,
and so on.  Two runs that find the same partition therefore return the
same label array even if Lloyd's visited the clusters in different roles.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


EXACT_BIPARTITION_MAX_N = 12


@dataclass(frozen=True)
class ClusterAssignment:
    labels: np.ndarray    # (N,) int, canonicalised
    centers: np.ndarray   # (K, P) in canonical label order
    wcss: float           # within-cluster sum of squared distances
    n_iter: int           # Lloyd iterations of the winning restart (0 = exact search)


def _exact_bipartition(points: np.ndarray) -> tuple[float, np.ndarray, np.ndarray]:
    """Globally optimal 2-clustering by scoring every bipartition.

    Starts from the no-split configuration so that degenerate inputs
    (all points identical) keep a single populated cluster; a split must
    improve the WCSS strictly to be adopted.
    """
    n = points.shape[0]
    mean = points.mean(axis=0)
    best_wcss = float(((points - mean) ** 2).sum())
    best_labels = np.zeros(n, dtype=np.int64)
    best_centers = np.stack([mean, mean])
    for mask in range(1, 1 << (n - 1)):  # point 0 stays on side 0
        side = np.zeros(n, dtype=bool)
        for i in range(1, n):
            side[i] = bool((mask >> (i - 1)) & 1)
        a, b = points[~side], points[side]
        ca, cb = a.mean(axis=0), b.mean(axis=0)
        wcss = float(((a - ca) ** 2).sum() + ((b - cb) ** 2).sum())
        if wcss < best_wcss - 1e-12:
            best_wcss = wcss
            best_labels = side.astype(np.int64)
            best_centers = np.stack([ca, cb])
    return best_wcss, best_labels, best_centers


def _seed_centers(points: np.ndarray, k: int, first: int) -> np.ndarray:
    chosen = [first]
    d2 = ((points - points[first]) ** 2).sum(axis=1)
    while len(chosen) < k:
        nxt = int(np.argmax(d2))
        chosen.append(nxt)
        d2 = np.minimum(d2, ((points - points[nxt]) ** 2).sum(axis=1))
    return points[chosen].astype(np.float64).copy()


def _lloyd(
    points: np.ndarray,
    centers: np.ndarray,
    max_iter: int = 100,
) -> tuple[np.ndarray, np.ndarray, float, int, list[float]]:
    """Run Lloyd's to convergence; returns labels, centers, wcss, iterations, wcss trace."""
    n, k = points.shape[0], centers.shape[0]
    centers = centers.copy()
    labels = np.full(n, -1, dtype=np.int64)
    trace: list[float] = []
    it = 0
    for it in range(1, max_iter + 1):
        d2 = ((points[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        new_labels = np.argmin(d2, axis=1)

        # an emptied cluster steals the farthest member of the largest one,
        # unless every candidate sits exactly on its center already
        for empty in range(k):
            if np.any(new_labels == empty):
                continue
            sizes = np.bincount(new_labels, minlength=k)
            big = int(np.argmax(sizes))
            members = np.where(new_labels == big)[0]
            dists = ((points[members] - centers[big]) ** 2).sum(axis=1)
            far = int(np.argmax(dists))
            if dists[far] > 0.0:
                new_labels[members[far]] = empty
                centers[empty] = points[members[far]]

        for c in range(k):
            members = new_labels == c
            if np.any(members):
                centers[c] = points[members].mean(axis=0)
        wcss = float(((points - centers[new_labels]) ** 2).sum())
        trace.append(wcss)
        if np.array_equal(new_labels, labels):
            break
        labels = new_labels
    return labels, centers, trace[-1], it, trace


def _canonicalise(labels: np.ndarray, centers: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    remap: dict[int, int] = {}
    for lab in labels:
        if int(lab) not in remap:
            remap[int(lab)] = len(remap)
    for lab in range(centers.shape[0]):
        if lab not in remap:
            remap[lab] = len(remap)
    new_labels = np.array([remap[int(lab)] for lab in labels], dtype=np.int64)
    order = sorted(remap, key=lambda old: remap[old])
    return new_labels, centers[order].copy()


def kmeans_cluster(
    points: np.ndarray,
    k: int,
    seed: int = 0,
    n_restarts: int = 10,
    max_iter: int = 100,
) -> ClusterAssignment:
    """Cluster row vectors into ``k`` groups; deterministic for a given seed."""
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2 or points.shape[0] < 1:
        raise ValueError("points must be a non-empty (N, P) array")
    n = points.shape[0]
    if not 1 <= k <= n:
        raise ValueError(f"k must be in [1, {n}], got {k}")

    if k == 2 and n <= EXACT_BIPARTITION_MAX_N:
        wcss, labels, centers = _exact_bipartition(points)
        labels, centers = _canonicalise(labels, centers)
        return ClusterAssignment(labels=labels, centers=centers, wcss=wcss, n_iter=0)

    rng = np.random.default_rng(seed)
    perm = rng.permutation(n)
    best: tuple[float, np.ndarray, np.ndarray, int] | None = None
    for r in range(max(1, n_restarts)):
        first = int(perm[r % n])
        labels, centers, wcss, n_iter, _ = _lloyd(points, _seed_centers(points, k, first), max_iter)
        if best is None or wcss < best[0] - 1e-12:
            best = (wcss, labels, centers, n_iter)
    wcss, labels, centers, n_iter = best
    labels, centers = _canonicalise(labels, centers)
    return ClusterAssignment(labels=labels, centers=centers, wcss=wcss, n_iter=n_iter)
