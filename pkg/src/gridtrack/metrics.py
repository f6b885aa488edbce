"""Evaluation metrics: per-track RMSE and set-to-set Wasserstein distance.

The Wasserstein distance between two finite position sets uses uniform
marginals (1/|set| per point). The transportation problem is solved exactly
by scaling both marginals to integers with L = lcm of the set sizes and
expanding each point into its integer number of unit-mass copies, which
turns the problem into an L-by-L assignment solved by the Hungarian method.
"""

from __future__ import annotations

import math

import numpy as np

from .assignment import hungarian


def rmse(estimates, truth, k_max: int | None = None) -> float:
    """Root mean squared position error over aligned time series.

    Both series must cover steps 1..k_max (their full length by default).
    """
    est = np.asarray(estimates, float)
    tru = np.asarray(truth, float)
    if est.shape != tru.shape:
        raise ValueError("series lengths differ")
    if est.ndim != 2 or est.shape[1] != 2:
        raise ValueError("series must be (K, 2) position arrays")
    if k_max is not None:
        if est.shape[0] < k_max:
            raise ValueError(f"series cover {est.shape[0]} steps, need {k_max}")
        est, tru = est[:k_max], tru[:k_max]
    return float(np.sqrt(np.mean(np.sum((est - tru) ** 2, axis=1))))


def wasserstein(P, P_hat, p: int = 1) -> float:
    """Order-p Wasserstein distance between two finite position sets."""
    P = np.atleast_2d(np.asarray(P, float))
    P_hat = np.atleast_2d(np.asarray(P_hat, float))
    if P.size == 0 or P_hat.size == 0:
        raise ValueError("position sets must be non-empty")
    if p < 1:
        raise ValueError("order must be at least 1")
    m, n = P.shape[0], P_hat.shape[0]
    diff = P[:, None, :] - P_hat[None, :, :]
    dist = np.sqrt(np.sum(diff * diff, axis=2))
    cost = dist ** p
    L = math.lcm(m, n)
    expanded = np.repeat(np.repeat(cost, L // m, axis=0), L // n, axis=1)
    _, total = hungarian(expanded)
    return float((total / L) ** (1.0 / p))
