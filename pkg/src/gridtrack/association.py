"""Position-to-track association with birth and death handling.

Each established track predicts its next position by propagating the
masked portion of the previous strength vector through the transition
matrix and taking the mass-weighted mean; the spread of that propagated
mass gives a per-track covariance for Mahalanobis gating. Track-to-
measurement pairing minimizes total Mahalanobis cost via the Hungarian
method; dummy rows and columns priced at the gate absorb unmatched
measurements (births) and unmatched tracks (deaths).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .assignment import hungarian
from .grid import Grid

ACTIVE = "active"
DEAD = "dead"

# chi-square 0.99 quantile with 2 degrees of freedom
DEFAULT_GATE = 9.21


class TrackLost(RuntimeError):
    """Raised when a track's propagated mass vanishes."""


@dataclass
class Track:
    id: int
    born_at: int
    positions: list = field(default_factory=list)  # planar positions per step
    mask: np.ndarray | None = None                 # grid indices of latest cluster
    status: str = ACTIVE
    died_at: int | None = None


@dataclass
class TrackPrediction:
    position: np.ndarray    # (2,)
    covariance: np.ndarray  # (2, 2) symmetric PSD


def predict_track(x_prev, mask, F: np.ndarray, grid: Grid) -> TrackPrediction:
    """Propagate a track's masked strength one step and summarize it.

    Position is the mass-weighted mean of grid points under the propagated
    strengths; covariance is the matching weighted sample covariance.
    """
    x_prev = np.asarray(x_prev, float).ravel()
    mask = np.asarray(mask, int).ravel()
    if mask.size == 0:
        raise ValueError("track mask is empty")
    masked = np.zeros_like(x_prev)
    masked[mask] = x_prev[mask]
    if masked.sum() <= 0:
        raise TrackLost("track has no strength mass")
    prop = np.asarray(F, float) @ masked
    total = float(prop.sum())
    if total <= 0:
        raise TrackLost("propagated strength mass vanished")
    w = prop / total
    position = (grid.points * w[:, None]).sum(axis=0)
    diff = grid.points - position
    covariance = (w[:, None, None] * diff[:, :, None] * diff[:, None, :]).sum(axis=0)
    return TrackPrediction(position, 0.5 * (covariance + covariance.T))


def mahalanobis(pred: TrackPrediction, p_meas, ridge: float = 0.0) -> float:
    """Squared Mahalanobis distance of a measured position to a prediction.

    ``ridge`` is added to the covariance diagonal before inversion so that
    degenerate (e.g. single-point) predictions stay usable.
    """
    d = pred.position - np.asarray(p_meas, float).ravel()
    cov = pred.covariance + ridge * np.eye(2)
    return float(d @ np.linalg.solve(cov, d))


def assign(costs: np.ndarray) -> tuple[list, float]:
    """Minimum-cost one-to-one assignment of a square cost matrix.

    Returns (pairs, total) with pairs as (row, column) tuples sorted by row.
    """
    costs = np.asarray(costs, float)
    if costs.ndim != 2 or costs.shape[0] != costs.shape[1]:
        raise ValueError("assign needs a square cost matrix; "
                         "use assign_with_birth_death for unequal counts")
    if not np.all(np.isfinite(costs)):
        raise ValueError("costs must be finite")
    cols, total = hungarian(costs)
    return [(i, int(cols[i])) for i in range(costs.shape[0])], total


def assign_with_birth_death(costs: np.ndarray, gate: float = DEFAULT_GATE
                            ) -> tuple[list, list, list]:
    """Assignment with births and deaths absorbed by gate-priced dummies.

    ``costs`` is tracks-by-measurements. Each track gets a private dummy
    column and each measurement a private dummy row, both at the gate cost;
    leftover dummy-dummy pairings cost nothing. A track matched to its dummy
    is a death, a measurement matched to a dummy is a birth.

    Returns (matches, births, deaths): matches as (track, measurement)
    pairs, births as measurement indices, deaths as track indices.
    """
    if gate <= 0:
        raise ValueError("gate must be positive")
    costs = np.asarray(costs, float)
    if costs.ndim != 2:
        raise ValueError("costs must be a matrix")
    n_tracks, n_meas = costs.shape
    size = n_tracks + n_meas
    aug = np.full((size, size), np.inf)
    aug[:n_tracks, :n_meas] = costs
    aug[:n_tracks, n_meas:] = np.where(np.eye(n_tracks, dtype=bool), gate, np.inf)
    aug[n_tracks:, :n_meas] = np.where(np.eye(n_meas, dtype=bool), gate, np.inf)
    aug[n_tracks:, n_meas:] = 0.0

    cols, _ = hungarian(aug)
    matches, births, deaths = [], [], []
    for t in range(n_tracks):
        if cols[t] < n_meas:
            matches.append((t, int(cols[t])))
        else:
            deaths.append(t)
    for r in range(n_tracks, size):
        if cols[r] < n_meas:
            births.append(int(cols[r]))
    return matches, sorted(births), deaths


def velocity(track: Track, Ts: float = 1.0) -> np.ndarray:
    """Latest displacement divided by the sampling period."""
    if len(track.positions) < 2:
        raise ValueError("velocity needs at least two positions")
    if Ts <= 0:
        raise ValueError("sampling period must be positive")
    return (np.asarray(track.positions[-1], float)
            - np.asarray(track.positions[-2], float)) / Ts


class TrackManager:
    """Per-step track store driven by clustered position estimates."""

    def __init__(self, F: np.ndarray, grid: Grid, gate: float = DEFAULT_GATE,
                 Ts: float = 1.0):
        self.F = np.asarray(F, float)
        self.grid = grid
        self.gate = gate
        self.Ts = Ts
        self.ridge = 1e-6 * max(grid.pitch_x, grid.pitch_y) ** 2
        self.tracks: list[Track] = []
        self._next_id = 1
        self._x_prev: np.ndarray | None = None

    @property
    def active(self) -> list[Track]:
        return [t for t in self.tracks if t.status == ACTIVE]

    def _spawn(self, k, position, mask):
        track = Track(self._next_id, born_at=k, positions=[np.asarray(position, float)],
                      mask=np.asarray(mask, int))
        self._next_id += 1
        self.tracks.append(track)
        return track

    def step(self, k: int, x_hat, positions, masks) -> None:
        """Associate this step's cluster estimates with the live tracks."""
        positions = [np.asarray(p, float) for p in positions]
        live = self.active
        if not live:
            for pos, mask in zip(positions, masks):
                self._spawn(k, pos, mask)
            self._x_prev = np.asarray(x_hat, float).copy()
            return

        preds = {}
        for t, track in enumerate(live):
            try:
                preds[t] = predict_track(self._x_prev, track.mask, self.F, self.grid)
            except TrackLost:
                track.status = DEAD
                track.died_at = k
        alive = [t for t in range(len(live)) if t in preds]

        if alive and positions:
            costs = np.array([[mahalanobis(preds[t], p, self.ridge)
                               for p in positions] for t in alive])
            matches, births, deaths = assign_with_birth_death(costs, self.gate)
        else:
            matches, births, deaths = [], list(range(len(positions))), list(range(len(alive)))

        for ti, mi in matches:
            track = live[alive[ti]]
            track.positions.append(positions[mi])
            track.mask = np.asarray(masks[mi], int)
        for ti in deaths:
            track = live[alive[ti]]
            track.status = DEAD
            track.died_at = k
        for mi in births:
            self._spawn(k, positions[mi], masks[mi])
        self._x_prev = np.asarray(x_hat, float).copy()
