"""Minimum-cost assignment by the Hungarian method (potentials form).

Handles rectangular matrices with rows <= columns, assigning every row to a
distinct column. Runtime is O(rows^2 * cols); ties are broken by the fixed
row-then-column scan order, which yields the lexicographically first
optimal assignment on all-equal cost matrices. Infinite entries mark
forbidden pairings and are never selected while a finite-cost perfect
assignment exists.
"""

from __future__ import annotations

import numpy as np


def hungarian(cost: np.ndarray) -> tuple[np.ndarray, float]:
    """Return (column index per row, total cost) of a minimum assignment."""
    cost = np.asarray(cost, float)
    if cost.ndim != 2:
        raise ValueError("cost must be a matrix")
    n, m = cost.shape
    if n > m:
        raise ValueError("need rows <= columns")
    if np.any(np.isnan(cost)) or np.any(cost == -np.inf):
        raise ValueError("costs must not be NaN or -inf")

    INF = np.inf
    u = np.zeros(n + 1)
    v = np.zeros(m + 1)
    match = np.zeros(m + 1, dtype=int)  # match[j] = row assigned to column j (1-based)
    way = np.zeros(m + 1, dtype=int)

    for i in range(1, n + 1):
        match[0] = i
        j0 = 0
        minv = np.full(m + 1, INF)
        used = np.zeros(m + 1, dtype=bool)
        while True:
            used[j0] = True
            i0 = match[j0]
            delta = INF
            j1 = -1
            for j in range(1, m + 1):
                if used[j]:
                    continue
                cur = cost[i0 - 1, j - 1] - u[i0] - v[j]
                if cur < minv[j]:
                    minv[j] = cur
                    way[j] = j0
                if minv[j] < delta:
                    delta = minv[j]
                    j1 = j
            if not np.isfinite(delta):
                raise ValueError("no finite-cost perfect assignment exists")
            for j in range(m + 1):
                if used[j]:
                    u[match[j]] += delta
                    v[j] -= delta
                else:
                    minv[j] -= delta
            j0 = j1
            if match[j0] == 0:
                break
        while j0:
            j1 = way[j0]
            match[j0] = match[j1]
            j0 = j1

    cols = np.empty(n, dtype=int)
    for j in range(1, m + 1):
        if match[j]:
            cols[match[j] - 1] = j - 1
    total = float(cost[np.arange(n), cols].sum())
    return cols, total
