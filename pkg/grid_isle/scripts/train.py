"""Simulate labeled scenarios and train the event detector."""
import logging
import math
from dataclasses import dataclass
from pathlib import Path

from simple_parsing import field

from ..detection.ensemble import BundleConfig, evaluate, train_ensemble
from ..dynamics.model import synthetic_dg_model
from ..dynamics.scenarios import DEFAULT_NOISE, ScenarioFile, make_training_set
from ..errors import ConfigError, DetectionError
from ..load_artifacts import resolve_scenario
from ..utils import write_json

logger = logging.getLogger(__name__)

TRAINING_SCENARIOS = (
    "pcc_fault",
    "control_attack",
    "line_to_line_fault",
    "load_alteration",
)


@dataclass
class Train:
    """Train the bagged-trees and SVM detector on simulated scenarios."""

    output: Path = field(alias=["-o"])
    """Directory to save the model bundle to."""

    scenarios: list[str] = field(
        default_factory=lambda: list(TRAINING_SCENARIOS), nargs="+"
    )
    """Scenario files (or bundled names) whose events are simulated."""

    num_seeds: int = 20
    """Randomized runs per event used for training."""

    holdout: float = 0.25
    """Fraction of additional runs per event held out for evaluation."""

    seed: int = 42
    """First seed; training and holdout runs use consecutive seeds after it."""

    horizon_s: float = 1.0
    """Length of each simulated run."""

    rounds: int = 5
    """Voting rounds NR stored with the bundle."""

    n_learners: int = 30
    """Number of bagged trees."""

    max_splits: int = 200_000
    """Split cap of each tree."""

    box_c: float = 1.0
    """SVM box constraint."""

    window: int = 1
    """Frames per feature vector."""

    max_per_class: int = 1000
    """Per-class cap of the training set, spread over the scenario strata."""

    bus_count: int = 6
    """Monitored buses of the synthetic DG model."""

    dg_count: int = 4
    """DGs of the synthetic DG model."""

    model_seed: int = 0
    """Seed of the synthetic DG model matrices."""

    noise: float = DEFAULT_NOISE
    """Measurement noise standard deviation."""

    progress: bool = field(action="store_true")
    """Show progress bars."""

    def __post_init__(self):
        """Check ranges."""
        if self.num_seeds < 1:
            raise ConfigError("num_seeds must be positive")
        if not 0 <= self.holdout < 1:
            raise ConfigError(f"holdout must lie in [0, 1), got {self.holdout}")

    def bundle_config(self, training_seeds: list[int]) -> BundleConfig:
        """Metadata stored with the trained detector."""
        return BundleConfig(
            bus_count=self.bus_count,
            dg_count=self.dg_count,
            rounds=self.rounds,
            n_learners=self.n_learners,
            max_splits=self.max_splits,
            box_c=self.box_c,
            feature_window=self.window,
            training_seeds=training_seeds,
            model_seed=self.model_seed,
            noise=self.noise,
            seed=self.seed,
        )

    def execute(self):
        """Simulate, train, evaluate on the holdout runs and save the bundle."""
        events = [
            ev
            for name in self.scenarios
            for ev in ScenarioFile.load(resolve_scenario(name)).events
        ]
        if not events:
            raise ConfigError("The training scenarios define no events")

        model = synthetic_dg_model(
            dg_count=self.dg_count, bus_count=self.bus_count, seed=self.model_seed
        )
        n_holdout = math.ceil(self.holdout * self.num_seeds)
        train_seeds = list(range(self.seed, self.seed + self.num_seeds))
        holdout_seeds = list(
            range(self.seed + self.num_seeds, self.seed + self.num_seeds + n_holdout)
        )

        logger.info(f"Simulating {len(events)} events x {self.num_seeds} seeds...")
        dataset = make_training_set(
            model,
            events,
            train_seeds,
            horizon=self.horizon_s,
            window=self.window,
            max_per_class=self.max_per_class,
            noise=self.noise,
        )
        counts = dataset.class_counts()
        if min(counts.values()) == 0:
            raise DetectionError(
                f"Training set holds a single class {counts}; add scenarios with "
                f"abnormal and nominal samples"
            )

        detector = train_ensemble(
            dataset, self.bundle_config(train_seeds), progress=self.progress
        )
        detector.save(self.output)

        metrics: dict = dict(
            train_counts=counts,
            train_strata=dataset.stratum_counts(),
            holdout_seeds=holdout_seeds,
        )
        if holdout_seeds:
            test = make_training_set(
                model,
                events,
                holdout_seeds,
                horizon=self.horizon_s,
                window=self.window,
                max_per_class=None,
                noise=self.noise,
            )
            metrics.update(evaluate(detector, test.x, test.y))
            metrics["holdout_counts"] = test.class_counts()
            logger.info(
                f"Holdout accuracy {metrics['accuracy']:.4f}, mean round "
                f"{metrics['mean_round_ms']:.2f} ms"
            )
        write_json(self.output / "metrics.json", metrics)
        logger.info(f"Saved model bundle to {self.output}")
