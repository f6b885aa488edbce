"""Scenario configuration: schema, JSON loading, and validation.

A scenario file is a JSON object with nested sections for the region, grid,
sensors, propagation model, movement kernel, targets, noise levels, tracker
choice, and the estimation/association pipeline. Unknown keys are rejected
so typos surface as errors rather than silently falling back to defaults.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

TRACKER_KINDS = ("agnostic", "sparse_kf", "iekf", "hmm")


class ConfigError(ValueError):
    """Malformed or inconsistent scenario configuration."""


@dataclass
class TargetSpec:
    start: tuple          # planar start position, meters
    strength: float
    birth: int = 1        # first time index the target exists
    death: int | None = None  # first time index the target no longer exists

    def __post_init__(self):
        if self.strength <= 0:
            raise ConfigError("target strength must be positive")
        if self.birth < 1:
            raise ConfigError("birth time must be at least 1")
        if self.death is not None and self.death <= self.birth:
            raise ConfigError("death time must come after birth")


@dataclass
class TrackerSpec:
    kind: str = "sparse_kf"
    alpha: float = 0.1
    covariance: str = "standard"
    rho: str = "l1"
    mu: float | None = None       # defaults to the configured target count
    sigma: float = 2.0
    iterations: int = 10
    projected: bool = True
    strength: float | None = None  # HMM known strength; defaults to target 1's
    max_iters: int = 500
    tol: float = 1e-8

    def __post_init__(self):
        if self.kind not in TRACKER_KINDS:
            raise ConfigError(f"unknown tracker kind {self.kind!r}")
        if self.kind == "agnostic":
            self.alpha = 0.0


@dataclass
class PipelineSpec:
    known_targets: int | None = None  # None selects silhouette-based counting
    eps_frac: float = 1e-3
    max_clusters: int = 5
    restarts: int = 10
    gate: float = 9.21

    def __post_init__(self):
        if not 0.0 < self.eps_frac < 1.0:
            raise ConfigError("eps_frac must lie in (0, 1)")
        if self.gate <= 0:
            raise ConfigError("gate must be positive")


@dataclass
class ScenarioConfig:
    region_width: float = 300.0
    region_height: float = 300.0
    nx: int = 10
    ny: int = 10
    n_sensors: int = 20
    half_gain_distance: float = 60.0
    kernel_offsets: list = field(default_factory=lambda: [
        (0, 0, 0.25), (1, 0, 0.25), (0, 1, 0.25), (1, 1, 0.25)])
    targets: list = field(default_factory=list)
    noise_variance: float = 1.0
    process_noise: float = 1.0
    sampling_period: float = 1.0
    duration: int = 15
    runs: int = 100
    seed: int = 1
    tracker: TrackerSpec = field(default_factory=TrackerSpec)
    pipeline: PipelineSpec = field(default_factory=PipelineSpec)

    def __post_init__(self):
        if self.duration < 1:
            raise ConfigError("duration must be at least 1")
        if self.runs < 1:
            raise ConfigError("runs must be at least 1")
        if self.noise_variance < 0:
            raise ConfigError("noise variance must be non-negative")
        if not self.targets:
            raise ConfigError("at least one target is required")

    def to_dict(self) -> dict:
        return {
            "region": {"width": self.region_width, "height": self.region_height},
            "grid": {"nx": self.nx, "ny": self.ny},
            "sensors": {"count": self.n_sensors},
            "propagation": {"half_gain_distance": self.half_gain_distance},
            "kernel": {"offsets": [list(o) for o in self.kernel_offsets]},
            "targets": [{"start": list(t.start), "strength": t.strength,
                         "birth": t.birth, "death": t.death}
                        for t in self.targets],
            "noise_variance": self.noise_variance,
            "process_noise": self.process_noise,
            "sampling_period": self.sampling_period,
            "duration": self.duration,
            "runs": self.runs,
            "seed": self.seed,
            "tracker": {k: v for k, v in vars(self.tracker).items()},
            "pipeline": {k: v for k, v in vars(self.pipeline).items()},
        }

    def manifest_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


def _take(section: dict, where: str, **fields):
    """Pull known keys out of a section, rejecting unknown ones."""
    unknown = set(section) - set(fields)
    if unknown:
        raise ConfigError(f"unknown keys in {where}: {sorted(unknown)}")
    out = {}
    for key, (required, default) in fields.items():
        if key in section:
            out[key] = section[key]
        elif required:
            raise ConfigError(f"missing required field {where}.{key}")
        else:
            out[key] = default
    return out


def config_from_dict(raw: dict) -> ScenarioConfig:
    if not isinstance(raw, dict):
        raise ConfigError("configuration root must be an object")
    top_known = {"region", "grid", "sensors", "propagation", "kernel",
                 "targets", "noise_variance", "process_noise",
                 "sampling_period", "duration", "runs", "seed", "tracker",
                 "pipeline"}
    unknown = set(raw) - top_known
    if unknown:
        raise ConfigError(f"unknown top-level keys: {sorted(unknown)}")

    region = _take(raw.get("region", {}), "region",
                   width=(True, None), height=(True, None))
    grid = _take(raw.get("grid", {}), "grid", nx=(True, None), ny=(True, None))
    sensors = _take(raw.get("sensors", {}), "sensors", count=(True, None))
    prop = _take(raw.get("propagation", {}), "propagation",
                 half_gain_distance=(False, 60.0))
    kernel = _take(raw.get("kernel", {}), "kernel", offsets=(True, None))
    offsets = [(int(dr), int(dc), float(p)) for dr, dc, p in kernel["offsets"]]

    if "targets" not in raw or not raw["targets"]:
        raise ConfigError("missing required field targets")
    targets = []
    for i, t in enumerate(raw["targets"]):
        fields_ = _take(t, f"targets[{i}]", start=(True, None),
                        strength=(True, None), birth=(False, 1),
                        death=(False, None))
        targets.append(TargetSpec(tuple(float(v) for v in fields_["start"]),
                                  float(fields_["strength"]),
                                  int(fields_["birth"]),
                                  None if fields_["death"] is None
                                  else int(fields_["death"])))

    tr = _take(raw.get("tracker", {}), "tracker",
               kind=(False, "sparse_kf"), alpha=(False, 0.1),
               covariance=(False, "standard"), rho=(False, "l1"),
               mu=(False, None), sigma=(False, 2.0), iterations=(False, 10),
               projected=(False, True), strength=(False, None),
               max_iters=(False, 500), tol=(False, 1e-8))
    pl = _take(raw.get("pipeline", {}), "pipeline",
               known_targets=(False, None), eps_frac=(False, 1e-3),
               max_clusters=(False, 5), restarts=(False, 10),
               gate=(False, 9.21))

    return ScenarioConfig(
        region_width=float(region["width"]),
        region_height=float(region["height"]),
        nx=int(grid["nx"]), ny=int(grid["ny"]),
        n_sensors=int(sensors["count"]),
        half_gain_distance=float(prop["half_gain_distance"]),
        kernel_offsets=offsets,
        targets=targets,
        noise_variance=float(raw.get("noise_variance", 1.0)),
        process_noise=float(raw.get("process_noise", 1.0)),
        sampling_period=float(raw.get("sampling_period", 1.0)),
        duration=int(raw.get("duration", 15)),
        runs=int(raw.get("runs", 100)),
        seed=int(raw.get("seed", 1)),
        tracker=TrackerSpec(**tr),
        pipeline=PipelineSpec(**pl),
    )


def load_config(path) -> ScenarioConfig:
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON at line {exc.lineno}, "
                          f"column {exc.colno}: {exc.msg}") from None
    return config_from_dict(raw)


def bundled_config_path(name: str) -> Path:
    """Path of a shipped scenario file ('single_target', 'two_target', ...)."""
    path = Path(__file__).parent / "configs" / f"{name}.json"
    if not path.exists():
        available = sorted(p.stem for p in path.parent.glob("*.json"))
        raise ConfigError(f"no bundled config {name!r}; available: {available}")
    return path
