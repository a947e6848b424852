"""Scenario definitions and the measurement-stream simulator."""
import inspect
import json
import logging
from copy import deepcopy
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Iterable, Literal, Optional, Sequence, Union

import numpy as np
from numpy.typing import NDArray
from tqdm.auto import tqdm

from ..errors import ConfigError, DetectionError
from ..utils import write_csv
from .model import (
    ANGLE,
    FREQ,
    DgModel,
    dg_channel_slice,
    step,
)

logger = logging.getLogger(__name__)

ScenarioLabel = Literal[
    "nominal",
    "three_phase_fault_pcc",
    "control_input_attack",
    "line_to_line_fault",
    "load_alteration",
]
ABNORMAL_LABELS = {
    "three_phase_fault_pcc",
    "control_input_attack",
    "line_to_line_fault",
}

DEFAULT_NOISE = 1e-3


@dataclass(frozen=True)
class Scenario:
    """One disturbance applied to DG `target` during [start, end)."""

    label: ScenarioLabel
    start: float = 0.0
    end: float = 0.0
    magnitude: float = 0.0
    target: int = 0

    def __post_init__(self):
        """Check the window."""
        if self.label not in ScenarioLabel.__args__:  # type: ignore[attr-defined]
            raise ConfigError(f"Unknown scenario label '{self.label}'")
        if self.label != "nominal" and not 0 <= self.start < self.end:
            raise ConfigError(
                f"Scenario '{self.label}' needs 0 <= start < end, "
                f"got [{self.start}, {self.end}]"
            )

    @property
    def abnormal(self) -> bool:
        """Whether frames inside the window should be labeled abnormal."""
        return self.label in ABNORMAL_LABELS

    def active(self, t: float) -> bool:
        """Whether the disturbance acts at time `t`."""
        return self.label != "nominal" and self.start <= t < self.end


NOMINAL = Scenario("nominal")


@dataclass
class ForcedAlarm:
    """A synthetic alarm injected into the trigger stage at time `t`."""

    t: float
    source: int = 0


@dataclass
class ScenarioFile:
    """A runnable scenario: disturbances, horizon and DG placement on the grid."""

    events: list[Scenario] = field(default_factory=list)
    horizon_s: float = 1.0
    dt_s: float = 1e-3
    seed: int = 42
    dg_buses: list[int] = field(default_factory=lambda: [4, 1, 4, 1])
    forced_alarms: list[ForcedAlarm] = field(default_factory=list)
    reislanding_uncertain: Optional[list[str]] = None
    name: str = ""

    def __post_init__(self):
        """Check that events and forced alarms fit the horizon and DGs."""
        if self.horizon_s <= 0 or self.dt_s <= 0:
            raise ConfigError("horizon_s and dt_s must be positive")
        for ev in self.events:
            if ev.label != "nominal" and ev.end > self.horizon_s + 1e-12:
                raise ConfigError(
                    f"Event '{ev.label}' ends at {ev.end}s, after the "
                    f"{self.horizon_s}s horizon"
                )
            if not 0 <= ev.target < len(self.dg_buses):
                raise ConfigError(f"Event target DG {ev.target} is not placed")
        for alarm in self.forced_alarms:
            if not 0 <= alarm.t <= self.horizon_s:
                raise ConfigError(f"Forced alarm at {alarm.t}s is outside the horizon")
            if not 0 <= alarm.source < len(self.dg_buses):
                raise ConfigError(
                    f"Forced alarm source DG {alarm.source} is not placed"
                )

    def to_dict(self) -> dict:
        """Convert to the on-disk layout."""
        out = asdict(self)
        out["events"] = [
            dict(
                label=ev.label,
                start_s=ev.start,
                end_s=ev.end,
                magnitude=ev.magnitude,
                target=ev.target,
            )
            for ev in self.events
        ]
        return out

    @classmethod
    def from_dict(cls, config: dict) -> "ScenarioFile":
        """Build from the on-disk layout, dropping unknown keys with a warning."""
        config = deepcopy(config)
        spec = inspect.getfullargspec(cls)
        for key in list(config):
            if key not in spec.args:
                config.pop(key)
                logger.warning(f"Ignoring config key '{key}'")

        events = []
        for ev in config.pop("events", []):
            events.append(
                Scenario(
                    label=ev["label"],
                    start=float(ev.get("start_s", 0.0)),
                    end=float(ev.get("end_s", 0.0)),
                    magnitude=float(ev.get("magnitude", 0.0)),
                    target=int(ev.get("target", 0)),
                )
            )
        alarms = [ForcedAlarm(**a) for a in config.pop("forced_alarms", [])]
        return cls(events=events, forced_alarms=alarms, **config)

    @classmethod
    def load(cls, path: Union[str, Path]) -> "ScenarioFile":
        """Read a scenario file; the name defaults to the file stem."""
        path = Path(path)
        try:
            with open(path) as f:
                config = json.load(f)
        except json.JSONDecodeError as e:
            raise ConfigError(f"{path}: {e}") from e
        config.setdefault("name", path.stem)
        return cls.from_dict(config)


@dataclass(frozen=True, eq=False)
class MeasurementFrame:
    """A timestamped output sample with the model's noise-free state estimate."""

    t: float
    y: NDArray[np.float64]
    x_est: NDArray[np.float64]
    label: int
    channels: tuple[str, ...]
    scenario: str = "nominal"


def _as_events(scenario: Union[Scenario, Sequence[Scenario], None]) -> list[Scenario]:
    if scenario is None:
        return []
    if isinstance(scenario, Scenario):
        return [scenario]
    return list(scenario)


def run_scenario(
    model: DgModel,
    scenario: Union[Scenario, Sequence[Scenario], None],
    horizon: float,
    seed: int,
    noise: float = DEFAULT_NOISE,
    progress: bool = False,
) -> list[MeasurementFrame]:
    """Simulate the measurement stream of a scenario.

    The plant receives the commanded input plus any attack bias, while the state
    estimate follows the commanded input only. Legitimate demand changes are part
    of the command, so they do not separate the two.

    Args:
        model: The DG model.
        scenario: One disturbance, several, or None for a nominal run.
        horizon: Length of the run in seconds.
        seed: Seed of the sensor and THD noise.
        noise: Half-width of the uniform sensor noise.
        progress: Show a progress bar.

    Returns:
        One frame per sample at `t = k * dt`, `k = 0 .. horizon / dt - 1`.
    """
    events = _as_events(scenario)
    for ev in events:
        if ev.label != "nominal" and ev.end > horizon + 1e-12:
            raise ConfigError(f"Event '{ev.label}' ends after the {horizon}s horizon")
        if not 0 <= ev.target < model.dg_count:
            raise ConfigError(f"Event target DG {ev.target} does not exist")

    rng = np.random.default_rng(seed)
    n_steps = int(round(horizon / model.dt))
    n, m = model.output_dim, model.state_dim
    channels = model.channels
    name = "+".join(ev.label for ev in events) or "nominal"

    x = np.zeros(m)
    x_est = np.zeros(m)
    thd_state = np.zeros(n)
    kicked: set[int] = set()
    frames = []
    for k in tqdm(range(n_steps), desc="Simulating", disable=not progress):
        t = k * model.dt
        u_cmd = np.zeros(model.input_dim)
        bias = np.zeros(model.input_dim)
        distortion = np.zeros(n)
        thd_gain = np.zeros(n)
        label = 0

        for idx, ev in enumerate(events):
            if not ev.active(t):
                continue
            label |= int(ev.abnormal)
            if ev.label == "load_alteration":
                u_cmd[model.demand_input(ev.target)] += ev.magnitude
            elif ev.label == "control_input_attack":
                bias[model.control_input(ev.target)] += ev.magnitude
            else:
                if idx not in kicked:
                    x[model.state_index(ev.target, ANGLE)] += 0.05 * ev.magnitude
                    x[model.state_index(ev.target, FREQ)] += 0.1 * ev.magnitude
                    kicked.add(idx)
                _fault_distortion(model, ev, distortion, thd_gain)

        # First-order filtered noise feeding the THD channels
        thd_state = 0.9 * thd_state + 0.1 * rng.uniform(-1.0, 1.0, size=n)
        y_dev = model.c_mat @ x + distortion + thd_gain * thd_state
        y = model.y0 + y_dev + rng.uniform(-noise, noise, size=n)
        frames.append(MeasurementFrame(t, y, x_est.copy(), label, channels, name))

        x, _ = step(model, x, u_cmd + bias, t)
        x_est, _ = step(model, x_est, u_cmd, t)

    logger.debug(
        f"Simulated '{name}' for {horizon}s: "
        f"{sum(f.label for f in frames)} abnormal frames of {len(frames)}"
    )
    return frames


def _fault_distortion(
    model: DgModel,
    ev: Scenario,
    distortion: NDArray[np.float64],
    thd_gain: NDArray[np.float64],
):
    rows = dg_channel_slice(model.bus_count, ev.target)
    v, i, thd = rows.start, rows.start + 3, rows.start + 6
    if ev.label == "three_phase_fault_pcc":
        phases = [0, 1, 2]
        sag, surge = ev.magnitude, 2.0 * ev.magnitude
    else:
        # Line-to-line faults only involve phases a and b
        phases = [0, 1]
        sag, surge = 0.8 * ev.magnitude, 1.5 * ev.magnitude
    for p in phases:
        distortion[v + p] -= sag * model.y0[v + p]
        distortion[i + p] += surge * model.y0[i + p]
        distortion[thd + p] += 0.5 * ev.magnitude * model.y0[thd + p]
        thd_gain[thd + p] = 0.05 * ev.magnitude
    bus = ev.target % model.bus_count
    distortion[bus] -= 0.5 * ev.magnitude


@dataclass
class TrainingSet:
    """Labeled feature vectors produced by simulation."""

    x: NDArray[np.float64]
    y: NDArray[np.int64]
    feature_names: tuple[str, ...]
    strata: Optional[NDArray[np.str_]] = None
    """Where each sample came from, see `frame_stratum`."""

    def __len__(self) -> int:
        """Number of samples."""
        return len(self.y)

    def class_counts(self) -> dict[int, int]:
        """Number of samples per class."""
        return {c: int((self.y == c).sum()) for c in (0, 1)}

    def stratum_counts(self) -> dict[str, int]:
        """Number of samples per stratum."""
        if self.strata is None:
            return {}
        names, counts = np.unique(self.strata, return_counts=True)
        return {str(k): int(v) for k, v in zip(names, counts)}


def randomized(
    ev: Scenario, rng: np.random.Generator, dg_count: int, horizon: float
) -> Scenario:
    """Jitter the magnitude, timing and target of a disturbance within `horizon`."""
    if ev.label == "nominal":
        return ev
    shift = rng.uniform(-0.02, 0.02)
    duration = ev.end - ev.start
    start = float(np.clip(ev.start + shift, 0.0, max(horizon - duration, 0.0)))
    return replace(
        ev,
        start=start,
        end=start + duration,
        magnitude=ev.magnitude * rng.uniform(0.6, 1.4),
        target=int(rng.integers(dg_count)),
    )


def frame_stratum(ev: Scenario, t: float) -> str:
    """Sampling stratum of a frame: before, during or after its disturbance."""
    if ev.label == "nominal" or t < ev.start:
        return "nominal"
    return ev.label if ev.active(t) else f"{ev.label}:after"


# Share of the negative budget for frames inside a legitimate disturbance
LEGITIMATE_WEIGHT = 3.0


def stratified_sample(
    strata: NDArray[np.str_],
    budget: int,
    rng: np.random.Generator,
    weights: Optional[dict[str, float]] = None,
) -> NDArray[np.int64]:
    """Indices of at most `budget` samples spread over the strata.

    Each stratum gets a share of the budget proportional to its weight (1 unless
    given). Strata smaller than their share are kept whole and the rest of the
    budget goes to the others.
    """
    weights = weights or {}
    groups = {s: np.flatnonzero(strata == s) for s in np.unique(strata)}
    quota: dict[str, int] = {}
    open_ = set(groups)
    left = budget
    while open_ and left > 0:
        total = sum(weights.get(s, 1.0) for s in open_)
        share = {s: left * weights.get(s, 1.0) / total for s in open_}
        small = {s for s in open_ if len(groups[s]) <= share[s]}
        if not small:
            floors = {s: int(share[s]) for s in open_}
            # Hand out the rounding remainder in a fixed order
            extra = left - sum(floors.values())
            for s in sorted(open_)[:extra]:
                floors[s] += 1
            quota.update(floors)
            break
        for s in small:
            quota[s] = len(groups[s])
            left -= len(groups[s])
        open_ -= small

    keep = [
        np.sort(rng.choice(groups[s], n, replace=False))
        if n < len(groups[s])
        else groups[s]
        for s, n in sorted(quota.items())
        if n > 0
    ]
    if not keep:
        return np.zeros(0, dtype=np.int64)
    return np.sort(np.concatenate(keep))


def make_training_set(
    models: Union[DgModel, Sequence[DgModel]],
    scenarios: Iterable[Scenario],
    seeds: Iterable[int],
    horizon: float = 1.0,
    window: int = 1,
    max_per_class: Optional[int] = 1000,
    noise: float = DEFAULT_NOISE,
) -> TrainingSet:
    """Simulate every (model, scenario, seed) triple and extract labeled features.

    Each seed also randomizes the disturbance magnitude, timing and target DG.
    Classes are capped at `max_per_class` samples each. Within a class the cap
    is spread over the strata of `frame_stratum`, so quiet frames cannot crowd
    out the short windows of a disturbance. Frames inside a load alteration get
    `LEGITIMATE_WEIGHT` times the share of the other negative strata.

    Raises:
        DetectionError: If no scenario is given.
    """
    from ..detection.features import FeatureLayout, extract_features

    models = [models] if isinstance(models, DgModel) else list(models)
    scenarios, seeds = list(scenarios), list(seeds)
    if not scenarios or not seeds or not models:
        raise DetectionError("Cannot build a training set from zero scenarios")

    layout = FeatureLayout(models[0].bus_count, models[0].dg_count)
    xs, ys, strata = [], [], []
    runs = [(m, s, seed) for m in models for s in scenarios for seed in seeds]
    for model, scenario, seed in tqdm(runs, desc="Generating training data"):
        rng = np.random.default_rng(seed)
        ev = randomized(scenario, rng, model.dg_count, horizon)
        frames = run_scenario(model, ev, horizon, seed, noise)
        for end in range(window, len(frames) + 1):
            chunk = frames[end - window : end]
            xs.append(extract_features(chunk, layout))
            ys.append(chunk[-1].label)
            strata.append(frame_stratum(ev, chunk[-1].t))

    x = np.stack(xs)
    y = np.asarray(ys, dtype=np.int64)
    s = np.asarray(strata)
    if max_per_class is not None:
        sampler = np.random.default_rng(seeds[0])
        weights = {
            label: LEGITIMATE_WEIGHT
            for label in ScenarioLabel.__args__  # type: ignore[attr-defined]
            if label != "nominal" and label not in ABNORMAL_LABELS
        }
        order = np.concatenate(
            [
                idx[stratified_sample(s[idx], max_per_class, sampler, weights)]
                for idx in (np.flatnonzero(y == c) for c in (0, 1))
            ]
        )
        x, y, s = x[order], y[order], s[order]

    dataset = TrainingSet(x, y, layout.names, s)
    counts = dataset.class_counts()
    if min(counts.values()) == 0:
        logger.warning(f"Training set has a single class: {counts}")
    else:
        logger.info(f"Training set: {counts[0]} nominal, {counts[1]} abnormal samples")
    logger.debug(f"Samples per stratum: {dataset.stratum_counts()}")
    return dataset


def export_stream(frames: Sequence[MeasurementFrame], path: Path):
    """Write a stream as CSV with header `t,label,<channel names...>`."""
    if not frames:
        raise ValueError("Cannot export an empty stream")
    header = ["t", "label", *frames[0].channels]
    write_csv(path, header, ([f.t, f.label, *f.y.tolist()] for f in frames))
