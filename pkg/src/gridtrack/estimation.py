"""From a grid strength estimate to per-target strengths and positions.

The estimated strength vector is thresholded to its significant support,
the surviving grid points are clustered with weight-aware k-means (weights
are the strength values), and each cluster yields one target: strength as
the summed mass, position as the mass-weighted centroid. When the target
count is unknown, the cluster count is chosen by the average silhouette
score over candidate counts.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import Grid


@dataclass
class WeightedPointSet:
    """Retained grid points with their strength weights and origin indices."""

    points: np.ndarray   # (n, 2)
    weights: np.ndarray  # (n,)
    indices: np.ndarray  # (n,) grid indices

    def __len__(self):
        return self.points.shape[0]


@dataclass
class Clustering:
    k: int
    labels: np.ndarray            # (n,) cluster label per retained point
    masks: list                   # per-cluster arrays of grid indices
    centers: np.ndarray           # (k, 2)
    wcss: float                   # weighted within-cluster sum of squares


def support_points(x_hat, grid: Grid, eps_frac: float = 1e-3) -> WeightedPointSet:
    """Grid points with strength above eps_frac times the maximum entry."""
    if not 0.0 < eps_frac < 1.0:
        raise ValueError("eps_frac must lie in (0, 1)")
    x_hat = np.asarray(x_hat, float).ravel()
    if np.any(x_hat < 0):
        raise ValueError("strength vector must be non-negative")
    peak = x_hat.max() if x_hat.size else 0.0
    idx = np.flatnonzero(x_hat > eps_frac * peak) if peak > 0 else np.array([], int)
    return WeightedPointSet(grid.points[idx], x_hat[idx], idx)


def _kmeans_once(points, weights, k, rng):
    n = points.shape[0]
    # greedy seeding: first center by weight, then weight times squared distance
    centers = np.empty((k, 2))
    probs = weights / weights.sum()
    centers[0] = points[rng.choice(n, p=probs)]
    d2 = np.sum((points - centers[0]) ** 2, axis=1)
    for j in range(1, k):
        scores = weights * d2
        total = scores.sum()
        if total <= 0:
            centers[j] = points[rng.choice(n, p=probs)]
        else:
            centers[j] = points[rng.choice(n, p=scores / total)]
        d2 = np.minimum(d2, np.sum((points - centers[j]) ** 2, axis=1))

    labels = None
    for _sweep in range(100):
        dist2 = np.sum((points[:, None, :] - centers[None, :, :]) ** 2, axis=2)
        new_labels = np.argmin(dist2, axis=1)
        # re-seed empty clusters at the worst-explained point
        for j in range(k):
            if not np.any(new_labels == j):
                worst = int(np.argmax(weights * dist2[np.arange(n), new_labels]))
                centers[j] = points[worst]
                new_labels[worst] = j
        if labels is not None and np.array_equal(new_labels, labels):
            break
        labels = new_labels
        for j in range(k):
            sel = labels == j
            w = weights[sel]
            centers[j] = (points[sel] * w[:, None]).sum(axis=0) / w.sum()
    dist2 = np.sum((points - centers[labels]) ** 2, axis=1)
    wcss = float(np.sum(weights * dist2))
    return labels, centers, wcss


def weighted_kmeans(pts: WeightedPointSet, k: int, restarts: int = 10,
                    seed: int = 0) -> Clustering:
    """Best-of-restarts weighted Lloyd clustering; deterministic per seed."""
    n = len(pts)
    if k < 1:
        raise ValueError("k must be at least 1")
    if k > n:
        raise ValueError(f"cannot form {k} clusters from {n} points")
    if k == 1:
        w = pts.weights
        center = (pts.points * w[:, None]).sum(axis=0) / w.sum()
        wcss = float(np.sum(w * np.sum((pts.points - center) ** 2, axis=1)))
        return Clustering(1, np.zeros(n, int), [pts.indices.copy()],
                          center[None, :], wcss)

    best = None
    for r in range(restarts):
        rng = np.random.default_rng([seed, r])
        labels, centers, wcss = _kmeans_once(pts.points, pts.weights, k, rng)
        if best is None or wcss < best[2]:
            best = (labels, centers, wcss)
    labels, centers, wcss = best
    masks = [pts.indices[labels == j] for j in range(k)]
    return Clustering(k, labels, masks, centers, wcss)


def silhouette_score(points, labels) -> float:
    """Mean silhouette over points, Euclidean distances, unweighted.

    Points in singleton clusters score zero, as do points whose intra- and
    inter-cluster distances both vanish.
    """
    points = np.asarray(points, float)
    labels = np.asarray(labels, int)
    n = points.shape[0]
    dist = np.sqrt(np.sum((points[:, None, :] - points[None, :, :]) ** 2, axis=2))
    uniq = np.unique(labels)
    scores = np.zeros(n)
    for i in range(n):
        own = labels == labels[i]
        size = int(own.sum())
        if size <= 1:
            continue
        a = dist[i, own].sum() / (size - 1)
        b = np.inf
        for lab in uniq:
            if lab == labels[i]:
                continue
            sel = labels == lab
            b = min(b, dist[i, sel].mean())
        denom = max(a, b)
        scores[i] = (b - a) / denom if denom > 0 else 0.0
    return float(scores.mean())


def silhouette_select(pts: WeightedPointSet, k_max: int = 5, restarts: int = 10,
                      seed: int = 0) -> tuple[int, Clustering]:
    """Cluster count with the largest mean silhouette; ties to the smaller k.

    Fewer than two points, or a point set with no spatial spread, short-
    circuits to a single cluster.
    """
    n = len(pts)
    if n == 0:
        return 1, Clustering(1, np.zeros(0, int), [np.array([], int)],
                             np.zeros((1, 2)), 0.0)
    if n < 2 or np.allclose(pts.points, pts.points[0]):
        return 1, weighted_kmeans(pts, 1, restarts, seed)
    best_k, best_score, best_clustering = None, -np.inf, None
    for k in range(2, min(k_max, n) + 1):
        clustering = weighted_kmeans(pts, k, restarts, seed)
        score = silhouette_score(pts.points, clustering.labels)
        if score > best_score + 1e-12:
            best_k, best_score, best_clustering = k, score, clustering
    return best_k, best_clustering


def estimate_strengths(c: Clustering, x_hat) -> list:
    """Per-cluster summed strength."""
    x_hat = np.asarray(x_hat, float).ravel()
    return [float(x_hat[mask].sum()) for mask in c.masks]


def estimate_positions(c: Clustering, x_hat, grid: Grid) -> list:
    """Per-cluster strength-weighted centroid of grid-point positions."""
    x_hat = np.asarray(x_hat, float).ravel()
    out = []
    for mask in c.masks:
        w = x_hat[mask]
        total = float(w.sum())
        if total <= 0:
            raise ValueError("cluster has no strength mass")
        out.append((grid.points[mask] * w[:, None]).sum(axis=0) / total)
    return out
