"""Independent brute-force oracles used to verify the implementations.

Everything here recomputes results from first principles (explicit
inverses, exhaustive enumeration) without touching the library's cached
matrices or solver paths.
"""

import itertools
import math

import numpy as np


def wls_objective(x_pred, P, y, H, R, lam, x):
    """Regularized WLS cost evaluated directly from the covariances."""
    x = np.asarray(x, float)
    r1 = np.asarray(x_pred, float) - x
    val = float(r1 @ np.linalg.inv(P) @ r1)
    if len(y):
        r2 = np.asarray(y, float) - np.asarray(H, float) @ x
        val += float(r2 @ np.linalg.inv(R) @ r2)
    return val + 2.0 * lam * float(np.sum(x))


def active_set_qp(x_pred, P, y, H, R, lam):
    """Exact constrained optimum by enumerating all active sets.

    For every subset S of coordinates allowed to be positive, solves the
    reduced stationarity system and keeps the best feasible candidate. The
    true optimum appears as the candidate whose S is its positive support.
    """
    x_pred = np.asarray(x_pred, float)
    G = x_pred.size
    A = np.linalg.inv(P)
    b = A @ x_pred
    if len(y):
        Ri = np.linalg.inv(R)
        A = A + np.asarray(H).T @ Ri @ np.asarray(H)
        b = b + np.asarray(H).T @ Ri @ np.asarray(y)

    best_x = np.zeros(G)
    best_val = wls_objective(x_pred, P, y, H, R, lam, best_x)
    for size in range(1, G + 1):
        for S in itertools.combinations(range(G), size):
            S = list(S)
            try:
                xs = np.linalg.solve(A[np.ix_(S, S)], b[S] - lam)
            except np.linalg.LinAlgError:
                continue
            if np.any(xs < -1e-12):
                continue
            cand = np.zeros(G)
            cand[S] = np.maximum(xs, 0.0)
            val = wls_objective(x_pred, P, y, H, R, lam, cand)
            if val < best_val:
                best_val, best_x = val, cand
    return best_x, best_val


def central_difference(f, x, h=1e-6):
    """Central finite-difference gradient of a scalar function."""
    x = np.asarray(x, float)
    g = np.zeros_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        g[i] = (f(x + e) - f(x - e)) / (2 * h)
    return g


def assignment_bruteforce(cost):
    """Minimum assignment total over all permutations."""
    cost = np.asarray(cost, float)
    n = cost.shape[0]
    best = np.inf
    for perm in itertools.permutations(range(cost.shape[1]), n):
        total = sum(cost[i, perm[i]] for i in range(n))
        best = min(best, total)
    return best


def transport_bruteforce(points_a, points_b, p=1):
    """Exact transportation optimum by enumerating integer tables.

    Marginals 1/m and 1/n scale to integers with L = lcm(m, n); every
    vertex of the transportation polytope is an integer table at that
    scale, so enumerating all tables with the right margins covers the
    optimum.
    """
    A = np.atleast_2d(np.asarray(points_a, float))
    B = np.atleast_2d(np.asarray(points_b, float))
    m, n = A.shape[0], B.shape[0]
    cost = np.linalg.norm(A[:, None, :] - B[None, :, :], axis=2) ** p
    L = math.lcm(m, n)
    row_total = L // m
    col_total = L // n

    best = [np.inf]

    def fill(row, col_left, acc):
        if acc >= best[0]:
            return
        if row == m:
            best[0] = acc
            return
        for combo in _compositions(row_total, col_left):
            extra = sum(c * cost[row, j] for j, c in enumerate(combo))
            fill(row + 1, [cl - c for cl, c in zip(col_left, combo)],
                 acc + extra)

    def _compositions(total, caps):
        if len(caps) == 1:
            if 0 <= total <= caps[0]:
                yield (total,)
            return
        for first in range(min(total, caps[0]) + 1):
            for rest in _compositions(total - first, caps[1:]):
                yield (first,) + rest

    fill(0, [col_total] * n, 0.0)
    return (best[0] / L) ** (1.0 / p)


def random_problem(rng, G, N, lam=0.0, scale=1.0):
    """Well-conditioned random corrector instance (plain dict)."""
    M = rng.normal(size=(G, G))
    P = scale * (M @ M.T / G + np.eye(G))
    Mr = rng.normal(size=(N, N))
    R = Mr @ Mr.T / N + np.eye(N)
    H = rng.uniform(0.0, 1.0, (N, G))
    x_pred = rng.uniform(0.0, 1.0, G)
    y = H @ x_pred + rng.normal(0.0, 0.5, N)
    return dict(x_pred=x_pred, P=P, y=y, H=H, R=R, lam=lam)
