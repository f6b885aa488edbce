"""Non-negative, optionally l1-regularized, weighted least-squares solver.

Solves

    min_{x >= 0}  (x_pred - x)' Wp (x_pred - x) + (y - H x)' Wr (y - H x)
                  + 2 * lam * 1' x

by gradient projection, where Wp and Wr are the inverses of the prior and
measurement covariances. On the non-negative orthant the l1 term is the
linear function 2*lam*1'x, so the objective is a smooth strictly convex
quadratic and projected gradient descent with a Lipschitz-safe step
converges to the unique optimum. Jacobi iterations update all coordinates
at once; Gauss-Seidel updates them one at a time using fresh values.

The module also provides the shrink-to-zero threshold lambda_bar (the
smallest lam at which the optimum is exactly 0) and non-negative
projection under an arbitrary positive-definite quadratic metric.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve

JACOBI = "jacobi"
GAUSS_SEIDEL = "gauss_seidel"


class NumericalError(RuntimeError):
    """Non-finite values or an irrecoverable factorization failure."""


def _chol_pd(mat: np.ndarray, name: str):
    """Lower Cholesky factor with a single jitter retry for borderline input."""
    mat = np.asarray(mat, float)
    if not np.all(np.isfinite(mat)):
        raise NumericalError(f"{name} has non-finite entries")
    try:
        return cho_factor(mat, lower=True, check_finite=False)
    except np.linalg.LinAlgError:
        jitter = 1e-10 * np.trace(mat) / mat.shape[0]
        try:
            return cho_factor(mat + jitter * np.eye(mat.shape[0]), lower=True,
                              check_finite=False)
        except np.linalg.LinAlgError as exc:
            raise NumericalError(f"{name} is not positive-definite") from exc


def pd_inverse(mat: np.ndarray, name: str = "matrix") -> np.ndarray:
    """Symmetric inverse of a positive-definite matrix via its Cholesky factor."""
    mat = np.atleast_2d(np.asarray(mat, float))
    chol = _chol_pd(mat, name)
    inv = cho_solve(chol, np.eye(mat.shape[0]), check_finite=False)
    return 0.5 * (inv + inv.T)


@dataclass
class RegularizedWlsProblem:
    """One corrector-step optimization instance.

    Either the prior covariance ``P_pred`` or its inverse ``prior_precision``
    may be supplied. N = 0 (empty measurement vector) is allowed, in which
    case only the prior and l1 terms remain.
    """

    x_pred: np.ndarray
    P_pred: np.ndarray | None
    y: np.ndarray
    H: np.ndarray
    R: np.ndarray | None
    lam: float = 0.0
    prior_precision: np.ndarray | None = None

    # cached pieces: gradient/2 = A x - b + lam * 1
    _Wp: np.ndarray = field(init=False, repr=False)
    _chol_r: tuple | None = field(init=False, repr=False)
    _A: np.ndarray = field(init=False, repr=False)
    _b: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.x_pred = np.asarray(self.x_pred, float).ravel()
        G = self.x_pred.size
        self.y = np.asarray(self.y, float).ravel()
        N = self.y.size
        self.H = np.asarray(self.H, float).reshape(N, G) if N else np.zeros((0, G))
        if self.lam < 0:
            raise ValueError("lam must be non-negative")

        if self.prior_precision is not None:
            Wp = np.asarray(self.prior_precision, float)
            _chol_pd(Wp, "prior precision")  # PD validation only
            Wp = 0.5 * (Wp + Wp.T)
        elif self.P_pred is not None:
            Wp = pd_inverse(self.P_pred, "P_pred")
        else:
            raise ValueError("need P_pred or prior_precision")
        self._Wp = Wp

        if N:
            if self.R is None:
                raise ValueError("R required when measurements are present")
            self._chol_r = _chol_pd(np.asarray(self.R, float), "R")
            self._A = Wp + self.H.T @ cho_solve(self._chol_r, self.H, check_finite=False)
            self._b = Wp @ self.x_pred + self.H.T @ cho_solve(self._chol_r, self.y, check_finite=False)
        else:
            self._chol_r = None
            self._A = Wp.copy()
            self._b = Wp @ self.x_pred
        self._A = 0.5 * (self._A + self._A.T)

    @property
    def size(self) -> int:
        return self.x_pred.size


@dataclass
class SolverOptions:
    mode: str = JACOBI
    step: float | None = None  # None selects the Lipschitz-safe automatic step
    max_iters: int = 500
    tol: float = 1e-8

    def __post_init__(self):
        if self.mode not in (JACOBI, GAUSS_SEIDEL):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.step is not None and self.step <= 0:
            raise ValueError("explicit step must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")
        if self.tol <= 0:
            raise ValueError("tolerance must be positive")


@dataclass
class GpResult:
    x: np.ndarray
    iters: int
    converged: bool
    objectives: list | None = None

    def __iter__(self):
        return iter((self.x, self.iters, self.converged))


def objective(problem: RegularizedWlsProblem, x) -> float:
    """Weighted-norm cost with the l1 term, evaluated in residual form."""
    x = np.asarray(x, float).ravel()
    if np.any(x < 0):
        raise ValueError("objective is defined on the non-negative orthant")
    r1 = problem.x_pred - x
    val = float(r1 @ (problem._Wp @ r1))
    if problem.y.size:
        r2 = problem.y - problem.H @ x
        val += float(r2 @ cho_solve(problem._chol_r, r2, check_finite=False))
    return val + 2.0 * problem.lam * float(x.sum())


def gradient(problem: RegularizedWlsProblem, x) -> np.ndarray:
    """Gradient of the objective: 2 (A x - b + lam * 1)."""
    x = np.asarray(x, float).ravel()
    return 2.0 * (problem._A @ x - problem._b + problem.lam)


def lambda_bar(problem: RegularizedWlsProblem) -> float:
    """Smallest l1 weight that collapses the optimum to the zero vector."""
    return float(np.max(np.abs(problem._b))) if problem._b.size else 0.0


def _auto_step(A: np.ndarray, iters: int = 50, margin: float = 0.95) -> float:
    """margin / L with L = 2 * lambda_max(A) estimated by power iteration."""
    G = A.shape[0]
    v = 1.0 + np.arange(G) / max(G, 1)
    v /= np.linalg.norm(v)
    lam_max = 1.0
    for _ in range(iters):
        w = A @ v
        norm = np.linalg.norm(w)
        if norm == 0.0:
            break
        lam_max = norm
        v = w / norm
    return margin / (2.0 * lam_max)


def solve_gp(problem: RegularizedWlsProblem, opts: SolverOptions | None = None,
             x0=None, track_objective: bool = False) -> GpResult:
    """Gradient projection onto the non-negative orthant.

    Starts from the prior mean unless ``x0`` is given. Stops when the iterate
    moves by less than ``opts.tol`` in infinity norm (for Jacobi this equals
    the projected-gradient optimality residual), or after ``opts.max_iters``
    sweeps with ``converged=False``.
    """
    opts = opts or SolverOptions()
    A, b, lam = problem._A, problem._b, problem.lam
    gamma = opts.step if opts.step is not None else _auto_step(A)
    x = np.maximum(problem.x_pred if x0 is None else np.asarray(x0, float).ravel(), 0.0)
    objectives = [objective(problem, x)] if track_objective else None

    two_gamma = 2.0 * gamma
    shift = two_gamma * (b - lam)  # x - gamma*grad == x - 2*gamma*A@x + shift
    converged = False
    iters = 0
    for iters in range(1, opts.max_iters + 1):
        if opts.mode == JACOBI:
            x_new = np.maximum(x - two_gamma * (A @ x) + shift, 0.0)
            delta = float(np.abs(x_new - x).max()) if x.size else 0.0
            x = x_new
        else:
            delta = 0.0
            x = x.copy()
            Ax = A @ x
            for j in range(x.size):
                gj = 2.0 * (Ax[j] - b[j] + lam)
                xj_new = max(x[j] - gamma * gj, 0.0)
                dj = xj_new - x[j]
                if dj != 0.0:
                    Ax += A[:, j] * dj
                    x[j] = xj_new
                delta = max(delta, abs(dj))
        if (iters & 31) == 0 and not np.all(np.isfinite(x)):
            raise NumericalError("non-finite iterate in gradient projection")
        if track_objective:
            objectives.append(objective(problem, x))
        if delta <= opts.tol:
            converged = True
            break
    if not np.all(np.isfinite(x)):
        raise NumericalError("non-finite iterate in gradient projection")
    return GpResult(x, iters, converged, objectives)


def project_nonneg_bmetric(z, B, opts: SolverOptions | None = None,
                           x0=None) -> np.ndarray:
    """argmin_{x >= 0} (x - z)' B (x - z) for positive-definite B.

    Feasible inputs are returned unchanged; otherwise the projection is
    computed by gradient projection on the equivalent prior-only problem,
    warm-started at ``x0`` when given.
    """
    z = np.asarray(z, float).ravel()
    if np.all(z >= 0):
        return z.copy()
    problem = RegularizedWlsProblem(
        x_pred=z, P_pred=None, y=np.zeros(0), H=np.zeros((0, z.size)), R=None,
        lam=0.0, prior_precision=np.asarray(B, float))
    opts = opts or SolverOptions(max_iters=2000, tol=1e-12)
    return solve_gp(problem, opts, x0=x0).x
