"""Scenario simulation and the Monte Carlo experiment harness.

Ground truth follows the discrete movement kernel on the grid: each step a
target stays or hops whole cells, its position recorded at cell centers,
and it is removed when a sampled move leaves the region or a scripted
death time arrives. Sensor snapshots superpose the propagation-weighted
strengths of all alive targets plus white Gaussian noise.

Randomness is split into labeled sub-streams (sensor placement, per-target
trajectories, per-run measurement noise, per-step clustering restarts)
derived from the master seed, so each source can be varied independently
and every run is reproducible in isolation.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .association import TrackManager
from .config import ScenarioConfig, TrackerSpec
from .estimation import (estimate_positions, estimate_strengths,
                         silhouette_select, support_points, weighted_kmeans)
from .grid import (Grid, MovementKernel, PropagationModel, SensorArray,
                   build_grid, build_measurement_matrix, build_transition,
                   calibrate_c)
from .hmm import HmmTracker, hmm_position
from .iekf import IekfConfig, IekfTracker, SparsityMeasurement
from .kalman import KfConfig, KfTracker
from .metrics import wasserstein
from .solver import SolverOptions

# labeled sub-stream codes for seed derivation
_SENSORS, _TRUTH, _NOISE, _CLUSTER, _REDRAW = 1, 2, 3, 4, 5


def derive_rng(master_seed: int, *stream) -> np.random.Generator:
    return np.random.default_rng([int(master_seed), *[int(s) for s in stream]])


def derive_seed(master_seed: int, *stream) -> int:
    seq = np.random.SeedSequence([int(master_seed), *[int(s) for s in stream]])
    return int(seq.generate_state(1, np.uint32)[0])


@dataclass
class TruthTarget:
    target_id: int
    strength: float
    birth: int
    positions: np.ndarray  # (steps, 2); row j is the position at time birth+j

    @property
    def last(self) -> int:
        return self.birth + self.positions.shape[0] - 1

    def alive(self, k: int) -> bool:
        return self.birth <= k <= self.last

    def position(self, k: int) -> np.ndarray:
        if not self.alive(k):
            raise ValueError(f"target {self.target_id} not alive at k={k}")
        return self.positions[k - self.birth]


@dataclass
class Truth:
    targets: list
    duration: int

    def alive_at(self, k: int) -> list:
        return [t for t in self.targets if t.alive(k)]

    def positions_at(self, k: int) -> np.ndarray:
        alive = self.alive_at(k)
        return (np.array([t.position(k) for t in alive])
                if alive else np.zeros((0, 2)))


@dataclass
class GridModel:
    """Everything geometric a tracker needs, resolved from a scenario."""

    grid: Grid
    sensors: SensorArray
    prop: PropagationModel
    kernel: MovementKernel
    H: np.ndarray
    F: np.ndarray


def build_model(cfg: ScenarioConfig) -> GridModel:
    grid = build_grid(cfg.region_width, cfg.region_height, cfg.nx, cfg.ny)
    rng = derive_rng(cfg.seed, _SENSORS)
    positions = rng.uniform([0.0, 0.0],
                            [cfg.region_width, cfg.region_height],
                            (cfg.n_sensors, 2))
    sensors = SensorArray(positions)
    prop = PropagationModel(calibrate_c(cfg.half_gain_distance))
    kernel = MovementKernel({(dr, dc): p for dr, dc, p in cfg.kernel_offsets})
    H = build_measurement_matrix(grid, sensors, prop)
    F = build_transition(grid, kernel)
    return GridModel(grid, sensors, prop, kernel, H, F)


def generate_truth(cfg: ScenarioConfig, grid: Grid, seed: int | None = None) -> Truth:
    """Sample one truth realization; deterministic for a given seed."""
    seed = cfg.seed if seed is None else seed
    offsets = sorted((dr, dc) for dr, dc, _ in cfg.kernel_offsets)
    probs = {(dr, dc): p for dr, dc, p in cfg.kernel_offsets}
    pvec = np.array([probs[o] for o in offsets])

    targets = []
    for idx, spec in enumerate(cfg.targets):
        x0, y0 = spec.start
        if not (0 <= x0 <= cfg.region_width and 0 <= y0 <= cfg.region_height):
            raise ValueError(f"target {idx + 1} starts outside the region")
        rng = derive_rng(seed, _TRUTH, idx)
        row, col = grid.row_col(grid.nearest_index(spec.start))
        path = [grid.points[grid.index_of(row, col)]]
        k = spec.birth
        while k < cfg.duration:
            if spec.death is not None and k + 1 >= spec.death:
                break
            dr, dc = offsets[rng.choice(len(offsets), p=pvec)]
            row, col = row + dr, col + dc
            if not (0 <= row < grid.ny and 0 <= col < grid.nx):
                break  # left the region: tracking this target stops
            path.append(grid.points[grid.index_of(row, col)])
            k += 1
        targets.append(TruthTarget(idx + 1, spec.strength, spec.birth,
                                   np.array(path)))
    return Truth(targets, cfg.duration)


def synthesize_measurements(truth: Truth, sensors: SensorArray,
                            prop: PropagationModel, noise_var: float,
                            seed: int, run_index: int = 0) -> np.ndarray:
    """(K, N) array of sensor snapshots for one noise realization."""
    K = truth.duration
    N = sensors.count
    clean = np.zeros((K, N))
    for t in truth.targets:
        for k in range(t.birth, t.last + 1):
            d = np.linalg.norm(sensors.positions - t.position(k), axis=1)
            clean[k - 1] += prop.gain(d) * t.strength
    rng = derive_rng(seed, _NOISE, run_index)
    noise = rng.normal(0.0, np.sqrt(noise_var), (K, N)) if noise_var > 0 else 0.0
    return clean + noise


def _build_tracker(model: GridModel, cfg: ScenarioConfig, spec: TrackerSpec):
    solver = SolverOptions(max_iters=spec.max_iters, tol=spec.tol)
    Q, R = cfg.process_noise, cfg.noise_variance
    if spec.kind in ("agnostic", "sparse_kf"):
        alpha = 0.0 if spec.kind == "agnostic" else spec.alpha
        return KfTracker(model.F, model.H, KfConfig(
            alpha=alpha, Q=Q, R=R, covariance_mode=spec.covariance,
            solver=solver))
    if spec.kind == "iekf":
        mu = float(len(cfg.targets)) if spec.mu is None else float(spec.mu)
        m = SparsityMeasurement(rho_kind=spec.rho, mu=mu, sigma=spec.sigma)
        return IekfTracker(model.F, model.H, IekfConfig(
            measurement=m, Q=Q, R=R, iters=spec.iterations,
            projected=spec.projected, solver=solver))
    if spec.kind == "hmm":
        if len(cfg.targets) != 1:
            raise ValueError("the HMM benchmark supports exactly one target")
        s = cfg.targets[0].strength if spec.strength is None else spec.strength
        return HmmTracker(model.F, model.H, model.grid, s, cfg.noise_variance)
    raise ValueError(f"unknown tracker kind {spec.kind!r}")


@dataclass
class StepRecord:
    k: int
    state: np.ndarray       # strength vector (or occupancy belief for the HMM)
    positions: list         # per-cluster planar position estimates
    strengths: list
    masks: list             # per-cluster grid-index arrays


@dataclass
class RunResult:
    steps: list
    tracks: list            # association.Track objects
    failures: list = field(default_factory=list)

    def positions_at(self, k: int) -> np.ndarray:
        rec = self.steps[k - 1]
        return (np.array(rec.positions)
                if rec.positions else np.zeros((0, 2)))


def run_pipeline(model: GridModel, cfg: ScenarioConfig, measurements,
                 tracker_spec: TrackerSpec | None = None,
                 run_index: int = 0) -> RunResult:
    """Drive tracker -> clustering -> positions -> track association once."""
    spec = tracker_spec or cfg.tracker
    tracker = _build_tracker(model, cfg, spec)
    manager = TrackManager(model.F, model.grid, gate=cfg.pipeline.gate,
                           Ts=cfg.sampling_period)
    pl = cfg.pipeline
    steps = []
    for k in range(1, measurements.shape[0] + 1):
        y = measurements[k - 1]
        if spec.kind == "hmm":
            belief = tracker.step(y)
            mmse, _ = hmm_position(belief, model.grid)
            state = belief.p
            positions = [mmse]
            strengths = [tracker.strength]
            masks = [np.array([int(np.argmax(belief.p))])]
        else:
            est = tracker.step(y)
            state = np.maximum(est.x, 0.0)
            pts = support_points(state, model.grid, pl.eps_frac)
            positions, strengths, masks = [], [], []
            if len(pts):
                seed_k = derive_seed(cfg.seed, _CLUSTER, run_index, k)
                if pl.known_targets is not None:
                    n_alive = sum(1 for t in cfg.targets
                                  if t.birth <= k and (t.death is None or k < t.death))
                    want = max(min(pl.known_targets, n_alive), 1)
                    clustering = weighted_kmeans(pts, min(want, len(pts)),
                                                 pl.restarts, seed_k)
                else:
                    _, clustering = silhouette_select(pts, pl.max_clusters,
                                                      pl.restarts, seed_k)
                positions = estimate_positions(clustering, state, model.grid)
                strengths = estimate_strengths(clustering, state)
                masks = list(clustering.masks)
        manager.step(k, state, positions, masks)
        steps.append(StepRecord(k, state, positions, strengths, masks))
    return RunResult(steps, manager.tracks)


def match_to_truth(truth: Truth, result: RunResult) -> dict:
    """Per-target squared-error series via per-step minimum-cost matching.

    Returns {target_id: [(k, squared_error), ...]} over the steps where the
    target is alive and an estimate was matched to it.
    """
    from .assignment import hungarian

    series = {t.target_id: [] for t in truth.targets}
    for k in range(1, truth.duration + 1):
        alive = truth.alive_at(k)
        est = result.positions_at(k)
        if not alive or est.shape[0] == 0:
            continue
        true_pos = np.array([t.position(k) for t in alive])
        d2 = np.sum((true_pos[:, None, :] - est[None, :, :]) ** 2, axis=2)
        if d2.shape[0] <= d2.shape[1]:
            cols, _ = hungarian(d2)
            pairs = [(i, int(cols[i])) for i in range(d2.shape[0])]
        else:
            cols, _ = hungarian(d2.T)
            pairs = [(int(cols[j]), j) for j in range(d2.shape[1])]
        for i, j in pairs:
            series[alive[i].target_id].append((k, float(d2[i, j])))
    return series


@dataclass
class MonteCarloResult:
    runs: int
    duration: int
    per_run_mse: np.ndarray       # (runs,) mean squared position error
    per_run_wd: np.ndarray        # (runs,) time-averaged order-1 WD
    mse_time: np.ndarray          # (runs, K) per-step MSE (NaN where undefined)
    wd_time: np.ndarray           # (runs, K) per-step WD (NaN where undefined)
    results: list                 # RunResult per run (None for failed runs)
    failed_runs: list

    @property
    def rmse(self) -> float:
        valid = self.per_run_mse[~np.isnan(self.per_run_mse)]
        return float(np.sqrt(valid.mean())) if valid.size else float("nan")

    @staticmethod
    def _column_stats(matrix) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        counts = np.sum(~np.isnan(matrix), axis=0)
        with np.errstate(invalid="ignore"):
            mean = np.where(counts > 0, np.nanmean(matrix, axis=0), np.nan)
        std = np.zeros(matrix.shape[1])
        multi = counts > 1
        if np.any(multi):
            std[multi] = np.nanstd(matrix[:, multi], axis=0, ddof=1)
        return mean, std, counts

    def rmse_time(self) -> tuple[np.ndarray, np.ndarray]:
        """Per-step RMSE across runs and the delta-method standard error."""
        mean_mse, std, counts = self._column_stats(self.mse_time)
        rmse = np.sqrt(mean_mse)
        with np.errstate(divide="ignore", invalid="ignore"):
            stderr = np.where(rmse > 0,
                              std / np.sqrt(np.maximum(counts, 1)) / (2.0 * rmse),
                              0.0)
        return rmse, stderr

    def wd_mean_time(self) -> tuple[np.ndarray, np.ndarray]:
        mean, std, counts = self._column_stats(self.wd_time)
        return mean, std / np.sqrt(np.maximum(counts, 1))


def _execute_run(model, cfg, truth, tracker_spec, run):
    """One Monte Carlo replica: returns (run, result-or-None, error-or-None)."""
    measurements = synthesize_measurements(
        truth, model.sensors, model.prop, cfg.noise_variance, cfg.seed, run)
    try:
        return run, run_pipeline(model, cfg, measurements, tracker_spec, run), None
    except Exception as exc:  # noqa: BLE001 - surfaced, run excluded
        return run, None, repr(exc)


def run_monte_carlo(cfg: ScenarioConfig, tracker_spec: TrackerSpec | None = None,
                    runs: int | None = None, model: GridModel | None = None,
                    truth: Truth | None = None, workers: int = 1,
                    redraw_truth: bool = False) -> MonteCarloResult:
    """Repeat the pipeline over redrawn measurement noise on a fixed truth.

    With ``redraw_truth=True`` every run also samples its own trajectory
    realization (robustness-study mode); metrics are computed against each
    run's own truth. Runs are independent (per-run derived seeds, shared
    immutable model) and may execute concurrently with ``workers > 1``;
    aggregation is an ordered reduction by run index, so the result does not
    depend on the degree of concurrency.
    """
    runs = cfg.runs if runs is None else runs
    model = model or build_model(cfg)
    truth = truth or generate_truth(cfg, model.grid)
    K = truth.duration

    if redraw_truth:
        truths = [generate_truth(cfg, model.grid,
                                 seed=derive_seed(cfg.seed, _REDRAW, run))
                  for run in range(runs)]
    else:
        truths = [truth] * runs

    per_run_mse = np.full(runs, np.nan)
    per_run_wd = np.full(runs, np.nan)
    mse_time = np.full((runs, K), np.nan)
    wd_time = np.full((runs, K), np.nan)
    results = [None] * runs
    failed = []

    if workers > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(
                lambda run: _execute_run(model, cfg, truths[run],
                                         tracker_spec, run),
                range(runs)))
    else:
        outcomes = [_execute_run(model, cfg, truths[run], tracker_spec, run)
                    for run in range(runs)]

    for run, result, error in outcomes:
        if error is not None:
            failed.append((run, error))
            continue
        results[run] = result
        truth = truths[run]

        series = match_to_truth(truth, result)
        sq_all = []
        for k in range(1, K + 1):
            sq_k = [err for tid in series
                    for (kk, err) in series[tid] if kk == k]
            if sq_k:
                mse_time[run, k - 1] = float(np.mean(sq_k))
            true_pos = truth.positions_at(k)
            est_pos = result.positions_at(k)
            if true_pos.shape[0] and est_pos.shape[0]:
                wd_time[run, k - 1] = wasserstein(true_pos, est_pos, p=1)
        for tid in series:
            sq_all.extend(err for _, err in series[tid])
        if sq_all:
            per_run_mse[run] = float(np.mean(sq_all))
        row = wd_time[run]
        if np.any(~np.isnan(row)):
            per_run_wd[run] = float(np.nanmean(row))

    return MonteCarloResult(runs, K, per_run_mse, per_run_wd,
                            mse_time, wd_time, results, failed)
