"""The three-classifier detector, its evaluation and its on-disk bundle."""
import inspect
import json
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from copy import deepcopy
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional, Union

import numpy as np
import torch as th
from numpy.typing import NDArray

from ..dynamics.scenarios import TrainingSet
from ..errors import ConfigError, DetectionError
from ..load_artifacts import resolve_bundle
from .features import FeatureLayout, Standardizer
from .svm import CUBIC, FINE_GAUSSIAN, KernelSpec, SvmModel, train_svm
from .trees import BaggedTreesModel, DecisionTree, train_bagged_trees

logger = logging.getLogger(__name__)

BUNDLE_FORMAT = 1


@dataclass
class BundleConfig:
    """Metadata stored next to the detector parameters."""

    bus_count: int = 6
    dg_count: int = 4
    rounds: int = 5
    classifiers: int = 3
    n_learners: int = 30
    max_splits: int = 200_000
    kernels: list[dict] = field(
        default_factory=lambda: [asdict(CUBIC), asdict(FINE_GAUSSIAN)]
    )
    box_c: float = 1.0
    feature_window: int = 1
    training_seeds: list[int] = field(default_factory=list)
    model_seed: int = 0
    noise: float = 1e-3
    seed: int = 42
    format_version: int = BUNDLE_FORMAT

    def to_dict(self) -> dict:
        """Convert to a dictionary."""
        return asdict(self)

    @classmethod
    def from_dict(cls, config: dict) -> "BundleConfig":
        """Create from a dictionary, dropping unknown keys with a warning."""
        config = deepcopy(config)
        spec = inspect.getfullargspec(cls)
        for key in list(config):
            if key not in spec.args:
                config.pop(key)
                logger.warning(f"Ignoring config key '{key}'")
        out = cls(**config)
        if out.format_version != BUNDLE_FORMAT:
            raise ConfigError(f"Unsupported bundle format {out.format_version}")
        return out

    @property
    def layout(self) -> FeatureLayout:
        """Feature layout of the bundle."""
        return FeatureLayout(self.bus_count, self.dg_count)


class EnsembleDetector:
    """Bagged trees, a cubic SVM and a fine Gaussian SVM voting independently.

    Each call to `classify_round` is counted and timed.
    """

    def __init__(
        self,
        config: BundleConfig,
        standardizer: Standardizer,
        trees: BaggedTreesModel,
        cubic: SvmModel,
        gaussian: SvmModel,
    ):
        """Wrap trained models."""
        self.config = config
        self.standardizer = standardizer
        self.trees = trees
        self.cubic = cubic
        self.gaussian = gaussian
        self.invocations = 0
        self.round_ms: list[float] = []

    @property
    def layout(self) -> FeatureLayout:
        """Feature layout the models were trained on."""
        return self.config.layout

    def votes(self, x: NDArray[np.float64]) -> NDArray[np.int64]:
        """Labels of (trees, cubic, gaussian) for a batch, shape (n, 3)."""
        x = np.atleast_2d(x)
        if x.shape[1] != len(self.layout):
            raise DetectionError(
                f"Expected {len(self.layout)} features, got {x.shape[1]}"
            )
        z = self.standardizer(x)
        return np.stack(
            [self.trees.predict(z), self.cubic.predict(z), self.gaussian.predict(z)],
            axis=1,
        )

    def classify_round(self, x: NDArray[np.float64]) -> tuple[int, int, int]:
        """One voting round on a single feature vector."""
        start = time.perf_counter()
        trees, cubic, gaussian = (int(v) for v in self.votes(x)[0])
        self.round_ms.append(1000 * (time.perf_counter() - start))
        self.invocations += 1
        return trees, cubic, gaussian

    def predict(self, x: NDArray[np.float64]) -> NDArray[np.int64]:
        """Majority of the three votes."""
        return (self.votes(x).sum(axis=1) >= 2).astype(np.int64)

    def save(
        self,
        path: Union[Path, str],
        ckpt: str = "params.pt",
        config: str = "config.json",
    ) -> None:
        """Save the detector to a directory.

        Args:
            path: The directory to save to.
            ckpt: Name of the parameter file.
            config: Name of the config file.
        """
        path = Path(path)
        path.mkdir(exist_ok=True, parents=True)
        state = dict(
            mean=th.as_tensor(self.standardizer.mean),
            std=th.as_tensor(self.standardizer.std),
            trees=[
                {k: th.as_tensor(v) for k, v in tree.state_dict().items()}
                for tree in self.trees.trees
            ],
            tree_seeds=list(self.trees.seeds),
            cubic=self.cubic.state_dict(),
            gaussian=self.gaussian.state_dict(),
        )
        th.save(state, path / ckpt)
        with open(path / config, "w") as f:
            json.dump(self.config.to_dict(), f, indent=2, sort_keys=True)

    @classmethod
    def load(cls, resource: Union[Path, str]) -> "EnsembleDetector":
        """Load a detector saved with `save`."""
        config_path, ckpt_path = resolve_bundle(resource)
        with open(config_path) as f:
            config = BundleConfig.from_dict(json.load(f))
        state = th.load(ckpt_path)

        trees = BaggedTreesModel(
            trees=[
                DecisionTree(**{k: v.numpy() for k, v in tree.items()})
                for tree in state["trees"]
            ],
            seeds=list(state["tree_seeds"]),
        )
        cubic_spec, gaussian_spec = (KernelSpec(**k) for k in config.kernels)
        return cls(
            config=config,
            standardizer=Standardizer(state["mean"].numpy(), state["std"].numpy()),
            trees=trees,
            cubic=SvmModel(kernel=cubic_spec, **state["cubic"]),
            gaussian=SvmModel(kernel=gaussian_spec, **state["gaussian"]),
        )


def train_ensemble(
    dataset: TrainingSet, config: BundleConfig, progress: bool = False
) -> EnsembleDetector:
    """Standardize the data and train the three classifiers concurrently.

    Raises:
        DetectionError: If the dataset is empty or does not hold both classes.
    """
    if len(dataset) == 0:
        raise DetectionError("Cannot train on an empty dataset")
    if len(dataset.feature_names) != len(config.layout):
        raise DetectionError("Dataset features do not match the bundle layout")

    standardizer = Standardizer.fit(dataset.x)
    z = standardizer(dataset.x)
    cubic_spec, gaussian_spec = (KernelSpec(**k) for k in config.kernels)

    with ThreadPoolExecutor(max_workers=3) as pool:
        trees = pool.submit(
            train_bagged_trees,
            z,
            dataset.y,
            config.n_learners,
            config.max_splits,
            config.seed,
            progress,
        )
        cubic = pool.submit(train_svm, z, dataset.y, cubic_spec, config.box_c)
        gaussian = pool.submit(train_svm, z, dataset.y, gaussian_spec, config.box_c)
        detector = EnsembleDetector(
            config, standardizer, trees.result(), cubic.result(), gaussian.result()
        )

    logger.info(
        f"Trained detector: {config.n_learners} trees, "
        f"{len(detector.cubic.dual_coef)} cubic and "
        f"{len(detector.gaussian.dual_coef)} Gaussian support vectors"
    )
    return detector


def evaluate(
    detector: EnsembleDetector,
    x: NDArray[np.float64],
    y: NDArray[np.int64],
    timing_samples: Optional[int] = 200,
) -> dict[str, float]:
    """Accuracy and confusion counts of the majority vote, plus round timing.

    Args:
        detector: The trained detector.
        x: Test features, shape (n, 3K + 9N).
        y: Test labels in {0, 1}.
        timing_samples: Number of single-vector rounds to time; None times all.

    Raises:
        DetectionError: If the test set is empty.
    """
    if len(y) == 0:
        raise DetectionError("Cannot evaluate on an empty test set")

    pred = detector.predict(x)
    y = np.asarray(y)
    tp = int(((pred == 1) & (y == 1)).sum())
    tn = int(((pred == 0) & (y == 0)).sum())
    fp = int(((pred == 1) & (y == 0)).sum())
    fn = int(((pred == 0) & (y == 1)).sum())

    timings = []
    for row in x[: timing_samples or len(x)]:
        start = time.perf_counter()
        detector.votes(row)
        timings.append(1000 * (time.perf_counter() - start))

    return dict(
        accuracy=(tp + tn) / len(y),
        tp=tp,
        fp=fp,
        tn=tn,
        fn=fn,
        mean_round_ms=float(np.mean(timings)),
        max_round_ms=float(np.max(timings)),
    )
