"""Clairvoyant single-target occupancy filter used as a benchmark.

Tracks the posterior probability of the target sitting on each grid point,
assuming the signal strength is known exactly. Prediction pushes the belief
through the transition matrix (identical to the linear strength recursion)
and renormalizes to condition on the target staying inside the region;
correction weights each grid point by the Gaussian likelihood of the sensor
snapshot, evaluated in the log domain to avoid underflow.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .grid import Grid
from .solver import NumericalError


@dataclass
class HmmBelief:
    """Probability vector over grid points at time index k."""

    p: np.ndarray
    k: int = 0

    def __post_init__(self):
        self.p = np.asarray(self.p, float).ravel()
        if np.any(self.p < 0):
            raise ValueError("belief entries must be non-negative")

    @staticmethod
    def uniform(G: int, k: int = 0) -> "HmmBelief":
        return HmmBelief(np.full(G, 1.0 / G), k)


def predict_unnormalized(b: HmmBelief, F: np.ndarray) -> np.ndarray:
    """Raw one-step prediction F @ p, before renormalization."""
    return np.asarray(F, float) @ b.p


def hmm_predict(b: HmmBelief, F: np.ndarray) -> HmmBelief:
    """Propagate the belief and renormalize after boundary mass loss."""
    raw = predict_unnormalized(b, F)
    total = float(raw.sum())
    if total <= 0:
        raise ValueError("belief vanished: all mass left the region")
    return HmmBelief(raw / total, b.k + 1)


def hmm_correct(b: HmmBelief, y, H, s: float, R) -> HmmBelief:
    """Bayes update with per-point Gaussian likelihoods, in the log domain.

    The likelihood of grid point j is the density of y under mean s * H[:, j]
    and covariance R (single full-strength target at point j).
    """
    if s <= 0:
        raise ValueError("signal strength must be positive")
    y = np.asarray(y, float).ravel()
    H = np.asarray(H, float)
    R = np.asarray(R, float)
    if R.ndim == 0:
        R = float(R) * np.eye(y.size)
    chol = cho_factor(R, lower=True, check_finite=False)

    resid = y[:, None] - s * H  # (N, G)
    # log-likelihood up to a shared constant: -0.5 * r' R^-1 r
    loglik = -0.5 * np.sum(resid * cho_solve(chol, resid, check_finite=False), axis=0)

    support = b.p > 0
    logpost = np.full(b.p.size, -np.inf)
    logpost[support] = np.log(b.p[support]) + loglik[support]
    peak = np.max(logpost)
    if not np.isfinite(peak):
        raise NumericalError("all posterior weights vanished")
    w = np.exp(logpost - peak)
    return HmmBelief(w / w.sum(), b.k)


def hmm_position(b: HmmBelief, grid: Grid) -> tuple[np.ndarray, np.ndarray]:
    """(MMSE, MAP) position estimates; MAP ties break toward the lowest index."""
    total = float(b.p.sum())
    if total <= 0:
        raise ValueError("belief has no mass")
    mmse = (grid.points * b.p[:, None]).sum(axis=0) / total
    map_pos = grid.points[int(np.argmax(b.p))].copy()
    return mmse, map_pos


class HmmTracker:
    """Stateful driver: uniform prior, then predict+correct per snapshot."""

    def __init__(self, F: np.ndarray, H: np.ndarray, grid: Grid,
                 strength: float, R):
        self.F = np.asarray(F, float)
        self.H = np.asarray(H, float)
        self.grid = grid
        self.strength = float(strength)
        R = np.asarray(R, float)
        if R.ndim == 0:
            # a zero-noise scenario degenerates to exact matching; a tiny
            # variance floor realizes that limit without a singular solve
            R = max(float(R), 1e-12) * np.eye(H.shape[0])
        self.R = R
        self.belief: HmmBelief | None = None

    def step(self, y) -> HmmBelief:
        if self.belief is None:
            prior = HmmBelief.uniform(self.grid.size, k=1)
        else:
            prior = hmm_predict(self.belief, self.F)
        self.belief = hmm_correct(prior, y, self.H, self.strength, self.R)
        return self.belief
