"""Prediction and corrector steps of the grid-state Kalman trackers.

The state is the non-negative vector of per-grid-point signal strengths.
Prediction propagates the state through the transition matrix and inflates
the covariance with process noise. Correction solves the non-negative
(optionally l1-regularized) weighted least-squares problem built from the
prediction and the current sensor snapshot; the regularization weight is a
fixed fraction ``alpha`` of the shrink-to-zero threshold, so ``alpha = 0``
gives the sparsity-agnostic tracker and ``0 < alpha < 1`` the sparse one.

Two covariance updates are available: the standard one, which ignores the
l1 term, and an enhanced one that adds a rank-one information term scaled
by the regularization weight and the corrected total strength.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_solve

from .solver import (RegularizedWlsProblem, SolverOptions, _chol_pd,
                     lambda_bar, pd_inverse, solve_gp)


@dataclass
class GridEstimate:
    """State estimate at time index k: strength vector x and covariance P."""

    k: int
    x: np.ndarray
    P: np.ndarray
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        self.x = np.asarray(self.x, float).ravel()
        self.P = np.asarray(self.P, float)
        if self.P.shape != (self.x.size, self.x.size):
            raise ValueError("covariance shape does not match state length")


@dataclass
class KfConfig:
    """Tracker configuration; defaults mirror the reference experiments."""

    alpha: float = 0.1
    Q: np.ndarray | float = 1.0
    R: np.ndarray | float = 1.0
    covariance_mode: str = "standard"  # or "enhanced"
    solver: SolverOptions = field(default_factory=SolverOptions)
    init_prior_scale: float = 100.0

    def __post_init__(self):
        if not 0.0 <= self.alpha < 1.0:
            raise ValueError("alpha must lie in [0, 1)")
        if self.covariance_mode not in ("standard", "enhanced"):
            raise ValueError(f"unknown covariance mode {self.covariance_mode!r}")


def _symmetrize(P: np.ndarray) -> np.ndarray:
    return 0.5 * (P + P.T)


def _as_cov(val, n: int) -> np.ndarray:
    mat = np.asarray(val, float)
    if mat.ndim == 0:
        return float(mat) * np.eye(n)
    if mat.shape != (n, n):
        raise ValueError(f"covariance must be scalar or {n}x{n}")
    return mat


def predict(prev: GridEstimate, F: np.ndarray, Q) -> GridEstimate:
    """One-step prediction: x -> F x, P -> F P F' + Q."""
    F = np.asarray(F, float)
    G = prev.x.size
    if F.shape != (G, G):
        raise ValueError("transition matrix shape does not match state")
    Q = _as_cov(Q, G)
    x = F @ prev.x
    P = _symmetrize(F @ prev.P @ F.T + Q)
    return GridEstimate(prev.k + 1, x, P)


def covariance_standard(P_pred: np.ndarray, H: np.ndarray, R) -> np.ndarray:
    """P - P H' (H P H' + R)^-1 H P; leaves P unchanged for empty or zero H."""
    P_pred = np.asarray(P_pred, float)
    H = np.asarray(H, float)
    if H.size == 0 or not np.any(H):
        return P_pred.copy()
    N = H.shape[0]
    R = _as_cov(R, N)
    S = H @ P_pred @ H.T + R
    chol = _chol_pd(S, "innovation covariance")
    PH = P_pred @ H.T
    return _symmetrize(P_pred - PH @ cho_solve(chol, PH.T, check_finite=False))


def covariance_enhanced(P_pred: np.ndarray, H: np.ndarray, R,
                        lam: float, x_hat: np.ndarray) -> np.ndarray:
    """Information-form update with the sparsity term lam/(2*sum(x)) * 11'."""
    x_hat = np.asarray(x_hat, float).ravel()
    total = float(x_hat.sum())
    if total <= 0:
        raise ValueError("enhanced covariance needs positive total strength")
    if lam < 0:
        raise ValueError("lam must be non-negative")
    P_pred = np.asarray(P_pred, float)
    G = P_pred.shape[0]
    info = pd_inverse(P_pred, "P_pred")
    H = np.asarray(H, float)
    if H.size:
        N = H.shape[0]
        R = _as_cov(R, N)
        chol_r = _chol_pd(R, "R")
        info = info + H.T @ cho_solve(chol_r, H, check_finite=False)
    info = info + (lam / (2.0 * total)) * np.ones((G, G))
    return pd_inverse(info, "corrector information")


def correct(pred: GridEstimate, y, H, config: KfConfig) -> GridEstimate:
    """Corrector step: constrained WLS state plus the configured covariance."""
    y = np.asarray(y, float).ravel()
    N = y.size
    G = pred.x.size
    H = np.asarray(H, float).reshape(N, G) if N else np.zeros((0, G))
    R = _as_cov(config.R, N) if N else None

    problem = RegularizedWlsProblem(x_pred=pred.x, P_pred=pred.P, y=y, H=H, R=R)
    lam_bar = lambda_bar(problem)
    lam = config.alpha * lam_bar
    problem.lam = lam  # the cached quadratic pieces do not involve lam
    result = solve_gp(problem, config.solver)

    info = {"lambda": lam, "lambda_bar": lam_bar,
            "solver_iters": result.iters, "solver_converged": result.converged,
            "covariance_mode": config.covariance_mode}
    if config.covariance_mode == "enhanced" and float(result.x.sum()) > 0:
        P = covariance_enhanced(pred.P, H, R if N else 0.0, lam, result.x)
    else:
        if config.covariance_mode == "enhanced":
            info["enhanced_fallback"] = True
        P = covariance_standard(pred.P, H, R if N else 0.0)
    return GridEstimate(pred.k, result.x, P, info)


def initial_estimate(y, H, config: KfConfig, k: int = 1) -> GridEstimate:
    """First-step estimate from a flat prior.

    The prior mean spreads the total measured energy uniformly over the grid
    (sum(y)/sum(H) per entry, clipped at zero) with covariance beta * I; the
    state is corrected through the unregularized constrained WLS solve and
    the covariance is reset to beta * I.
    """
    y = np.asarray(y, float).ravel()
    H = np.asarray(H, float)
    G = H.shape[1]
    beta = config.init_prior_scale
    level = max(float(y.sum()) / float(H.sum()), 0.0) if H.size else 0.0
    prior = GridEstimate(k, np.full(G, level), beta * np.eye(G))
    flat = KfConfig(alpha=0.0, Q=config.Q, R=config.R,
                    covariance_mode="standard", solver=config.solver,
                    init_prior_scale=beta)
    est = correct(prior, y, H, flat)
    est.P = beta * np.eye(G)
    est.info["initialized"] = True
    return est


class KfTracker:
    """Stateful driver: first measurement initializes, later ones predict+correct."""

    def __init__(self, F: np.ndarray, H: np.ndarray, config: KfConfig):
        self.F = np.asarray(F, float)
        self.H = np.asarray(H, float)
        self.config = config
        self.estimate: GridEstimate | None = None

    def step(self, y) -> GridEstimate:
        if self.estimate is None:
            self.estimate = initial_estimate(y, self.H, self.config)
        else:
            pred = predict(self.estimate, self.F, self.config.Q)
            self.estimate = correct(pred, y, self.H, self.config)
        return self.estimate
