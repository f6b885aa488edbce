"""Geometric and statistical skeleton of the grid model.

Builds the rectangular grid of candidate target locations, the
distance-dependent gain matrix H mapping grid signal strengths to sensor
readings, and the grid-to-grid transition matrix F induced by a discrete
movement kernel.

Conventions:
  - Grid points sit at cell centers, ordered row-major: index = r * nx + c.
  - Point (r, c) has coordinates ((c + 0.5) * width / nx, (r + 0.5) * height / ny),
    so y grows with the row index and "north" means increasing row.
  - F is indexed (destination, source): x_next = F @ x.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class Grid:
    """Rectangular grid of candidate locations at cell centers."""

    region_width: float
    region_height: float
    nx: int
    ny: int
    points: np.ndarray  # (G, 2) row-major cell-center positions, meters

    @property
    def size(self) -> int:
        return self.nx * self.ny

    @property
    def pitch_x(self) -> float:
        return self.region_width / self.nx

    @property
    def pitch_y(self) -> float:
        return self.region_height / self.ny

    def index_of(self, row: int, col: int) -> int:
        if not (0 <= row < self.ny and 0 <= col < self.nx):
            raise ValueError(f"cell ({row}, {col}) outside {self.ny}x{self.nx} grid")
        return row * self.nx + col

    def row_col(self, index: int) -> tuple[int, int]:
        return divmod(index, self.nx)

    def nearest_index(self, position) -> int:
        """Grid index of the cell center closest to a planar position."""
        d2 = np.sum((self.points - np.asarray(position, float)) ** 2, axis=1)
        return int(np.argmin(d2))


def build_grid(region_width: float, region_height: float, nx: int, ny: int) -> Grid:
    """Lay out an nx-by-ny grid of cell-center points over the region."""
    if region_width <= 0 or region_height <= 0:
        raise ValueError("region dimensions must be positive")
    if nx < 1 or ny < 1:
        raise ValueError("grid counts must be at least 1")
    cw = region_width / nx
    ch = region_height / ny
    rows, cols = np.meshgrid(np.arange(ny), np.arange(nx), indexing="ij")
    xs = (cols.ravel() + 0.5) * cw
    ys = (rows.ravel() + 0.5) * ch
    points = np.column_stack([xs, ys])
    return Grid(region_width, region_height, nx, ny, points)


@dataclass(frozen=True)
class SensorArray:
    """Known planar sensor positions, one row per sensor."""

    positions: np.ndarray  # (N, 2) meters

    def __post_init__(self):
        pos = np.atleast_2d(np.asarray(self.positions, float))
        if pos.shape[0] < 1 or pos.shape[1] != 2:
            raise ValueError("need at least one sensor with 2-D positions")
        object.__setattr__(self, "positions", pos)

    @property
    def count(self) -> int:
        return self.positions.shape[0]


@dataclass(frozen=True)
class PropagationModel:
    """Distance gain h(d) = c / (c + d^2); unit gain at zero distance."""

    c: float

    def __post_init__(self):
        if self.c <= 0:
            raise ValueError("shape parameter c must be positive")

    def gain(self, d):
        d = np.asarray(d, float)
        if np.any(d < 0):
            raise ValueError("distance must be non-negative")
        return self.c / (self.c + d * d)


def propagation_gain(model: PropagationModel, d: float) -> float:
    """Gain at distance d; scalar convenience wrapper around the model."""
    return float(model.gain(d))


def calibrate_c(d_half: float) -> float:
    """Shape parameter giving half gain at distance d_half: c = d_half^2."""
    if d_half <= 0:
        raise ValueError("half-gain distance must be positive")
    return float(d_half) ** 2


def build_measurement_matrix(grid: Grid, sensors: SensorArray,
                             prop: PropagationModel) -> np.ndarray:
    """N x G matrix of gains; entry (n, i) = h(||q_n - g_i||)."""
    diff = sensors.positions[:, None, :] - grid.points[None, :, :]
    dist = np.sqrt(np.sum(diff * diff, axis=2))
    return prop.gain(dist)


@dataclass(frozen=True)
class MovementKernel:
    """Per-step displacement distribution over integer cell offsets.

    Offsets are (delta_row, delta_col) with probabilities summing to one.
    Positive delta_row moves toward larger y (north), positive delta_col
    toward larger x (east).
    """

    offsets: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.offsets:
            raise ValueError("kernel needs at least one offset")
        probs = np.array(list(self.offsets.values()), float)
        if np.any(probs < 0):
            raise ValueError("kernel probabilities must be non-negative")
        if abs(probs.sum() - 1.0) > 1e-12:
            raise ValueError("kernel probabilities must sum to 1")

    @staticmethod
    def identity() -> "MovementKernel":
        return MovementKernel({(0, 0): 1.0})

    @staticmethod
    def stay_north_east() -> "MovementKernel":
        """Stay, north, east, or northeast, each with probability 1/4."""
        return MovementKernel({(0, 0): 0.25, (1, 0): 0.25,
                               (0, 1): 0.25, (1, 1): 0.25})


def build_transition(grid: Grid, kernel: MovementKernel) -> np.ndarray:
    """G x G transition matrix F with entry (j, i) = P(move i -> j).

    Displacements landing outside the grid are dropped, so columns of
    boundary points sum to less than one: strength leaving the region
    is lost rather than reflected.
    """
    G = grid.size
    F = np.zeros((G, G))
    for r in range(grid.ny):
        for c in range(grid.nx):
            i = grid.index_of(r, c)
            for (dr, dc), p in kernel.offsets.items():
                rr, cc = r + dr, c + dc
                if 0 <= rr < grid.ny and 0 <= cc < grid.nx:
                    F[grid.index_of(rr, cc), i] += p
    return F


def interior_mask(grid: Grid, kernel: MovementKernel) -> np.ndarray:
    """Boolean mask of source points whose full kernel support stays on-grid."""
    mask = np.zeros(grid.size, dtype=bool)
    for r in range(grid.ny):
        for c in range(grid.nx):
            ok = all(0 <= r + dr < grid.ny and 0 <= c + dc < grid.nx
                     for (dr, dc) in kernel.offsets)
            mask[grid.index_of(r, c)] = ok
    return mask
