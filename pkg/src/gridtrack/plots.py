"""Figure rendering for the report paths.

Figures are written as PNG files next to the delimited output. Rendering is
deterministic (fixed size and dpi, no timestamps in metadata) so re-running
a command reproduces the files byte for byte.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

_SAVE = {"dpi": 120, "metadata": {"Software": None}}
_COLORS = ["tab:blue", "tab:orange", "tab:green", "tab:red", "tab:purple",
           "tab:brown", "tab:pink", "tab:gray"]


def _region_axes(ax, grid):
    ax.scatter(grid.points[:, 0], grid.points[:, 1], s=4, c="0.85", zorder=1)
    ax.set_xlim(0, grid.region_width)
    ax.set_ylim(0, grid.region_height)
    ax.set_aspect("equal")
    ax.set_xlabel("x [m]")
    ax.set_ylabel("y [m]")


def plot_truth(truth, grid, sensors, path) -> Path:
    """True trajectories and sensor layout over the region."""
    fig, ax = plt.subplots(figsize=(5.0, 5.0))
    _region_axes(ax, grid)
    ax.scatter(sensors.positions[:, 0], sensors.positions[:, 1],
               marker="^", s=25, c="k", label="sensors", zorder=2)
    for i, t in enumerate(truth.targets):
        c = _COLORS[i % len(_COLORS)]
        ax.plot(t.positions[:, 0], t.positions[:, 1], "-o", ms=3, color=c,
                label=f"target {t.target_id}", zorder=3)
        ax.plot(*t.positions[0], "s", ms=8, color=c, zorder=3)
    ax.legend(loc="upper left", fontsize=8)
    ax.set_title("ground truth")
    fig.savefig(path, **_SAVE)
    plt.close(fig)
    return Path(path)


def plot_tracks(truth, tracks, grid, path) -> Path:
    """Estimated tracks against the true trajectories."""
    fig, ax = plt.subplots(figsize=(5.0, 5.0))
    _region_axes(ax, grid)
    for i, t in enumerate(truth.targets):
        ax.plot(t.positions[:, 0], t.positions[:, 1], "-",
                color=_COLORS[i % len(_COLORS)], lw=2, alpha=0.5,
                label=f"true {t.target_id}", zorder=2)
    for track in tracks:
        pos = np.asarray(track.positions)
        if pos.size == 0:
            continue
        ax.plot(pos[:, 0], pos[:, 1], "--x", ms=4, lw=1,
                color=_COLORS[(track.id - 1) % len(_COLORS)],
                label=f"track {track.id}", zorder=3)
    ax.legend(loc="upper left", fontsize=7)
    ax.set_title("true and estimated tracks")
    fig.savefig(path, **_SAVE)
    plt.close(fig)
    return Path(path)


def plot_metric_series(rows, path) -> Path:
    """Per-step metric curves with standard-error bands.

    ``rows`` are (k, metric_name, mean, stderr, runs) tuples; one curve per
    metric name, overall rows (k = 0) are skipped.
    """
    named = {}
    for k, name, mean, stderr, _runs in rows:
        if k and mean is not None:
            named.setdefault(name, []).append((k, mean, stderr or 0.0))
    fig, ax = plt.subplots(figsize=(5.5, 3.5))
    for i, (name, pts) in enumerate(sorted(named.items())):
        pts.sort()
        ks = np.array([p[0] for p in pts], float)
        means = np.array([p[1] for p in pts])
        errs = np.array([p[2] for p in pts])
        c = _COLORS[i % len(_COLORS)]
        ax.plot(ks, means, "-o", ms=3, color=c, label=name)
        ax.fill_between(ks, means - errs, means + errs, color=c, alpha=0.2)
    ax.set_xlabel("time step k")
    ax.set_ylabel("metric")
    ax.legend(fontsize=8)
    ax.set_title("tracking metrics over time")
    fig.tight_layout()
    fig.savefig(path, **_SAVE)
    plt.close(fig)
    return Path(path)


def plot_sweep(rows, parameter: str, path) -> Path:
    """Mean metric against the swept parameter, log-scaled when it spans decades."""
    rows = sorted(rows)
    vals = np.array([r[0] for r in rows], float)
    means = np.array([r[1] for r in rows], float)
    errs = np.array([0.0 if r[2] is None else r[2] for r in rows], float)
    fig, ax = plt.subplots(figsize=(5.0, 3.5))
    ax.errorbar(vals, means, yerr=errs, fmt="-o", ms=4, capsize=3)
    positive = vals > 0
    if positive.all() and vals.size > 1 and vals.max() / vals.min() > 50:
        ax.set_xscale("log")
    ax.set_xlabel(parameter)
    ax.set_ylabel("mean RMSE [m]")
    ax.set_title(f"sweep over {parameter}")
    fig.tight_layout()
    fig.savefig(path, **_SAVE)
    plt.close(fig)
    return Path(path)
