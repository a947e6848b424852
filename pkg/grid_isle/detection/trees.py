"""CART decision trees with Gini splits and their bootstrap aggregation."""
import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from numpy.typing import NDArray
from tqdm.auto import tqdm

from ..errors import DetectionError

logger = logging.getLogger(__name__)

LEAF = -1


@dataclass
class DecisionTree:
    """A binary tree stored as parallel node arrays.

    Internal nodes send `x[feature] <= threshold` to `left`, everything else to
    `right`. Leaves have `feature == -1` and carry the predicted class in `value`.
    """

    feature: NDArray[np.int64]
    threshold: NDArray[np.float64]
    left: NDArray[np.int64]
    right: NDArray[np.int64]
    value: NDArray[np.int64]

    @property
    def n_splits(self) -> int:
        """Number of internal nodes."""
        return int((self.feature != LEAF).sum())

    def walk(self, x: NDArray[np.float64]) -> list[int]:
        """Node ids on the root-to-leaf path of a single sample."""
        node, path = 0, [0]
        while self.feature[node] != LEAF:
            if x[self.feature[node]] <= self.threshold[node]:
                node = self.left[node]
            else:
                node = self.right[node]
            path.append(int(node))
        return path

    def predict(self, x: NDArray[np.float64]) -> NDArray[np.int64]:
        """Class labels for a batch of samples."""
        x = np.atleast_2d(x)
        node = np.zeros(len(x), dtype=np.int64)
        active = self.feature[node] != LEAF
        while active.any():
            rows = np.flatnonzero(active)
            cur = node[rows]
            go_left = x[rows, self.feature[cur]] <= self.threshold[cur]
            node[rows] = np.where(go_left, self.left[cur], self.right[cur])
            active = self.feature[node] != LEAF
        return self.value[node]

    def state_dict(self) -> dict[str, NDArray]:
        """Arrays for serialization."""
        return dict(
            feature=self.feature,
            threshold=self.threshold,
            left=self.left,
            right=self.right,
            value=self.value,
        )


def _majority(y: NDArray[np.int64]) -> int:
    return int(np.bincount(y, minlength=2).argmax())


def _best_split(
    x: NDArray[np.float64], y: NDArray[np.int64]
) -> Optional[tuple[int, float]]:
    """Feature and threshold minimizing the weighted Gini impurity of the children."""
    n = len(y)
    order = np.argsort(x, axis=0, kind="stable")
    xs = np.take_along_axis(x, order, axis=0)
    ys = y[order]

    ones_left = np.cumsum(ys, axis=0)[:-1]
    n_left = np.arange(1, n, dtype=np.float64)[:, None]
    n_right = n - n_left
    ones_right = y.sum() - ones_left
    p_left, p_right = ones_left / n_left, ones_right / n_right
    impurity = (
        n_left * 2 * p_left * (1 - p_left) + n_right * 2 * p_right * (1 - p_right)
    ) / n
    impurity[xs[1:] <= xs[:-1]] = np.inf
    if not np.isfinite(impurity).any():
        return None

    pos, feat = np.unravel_index(np.argmin(impurity), impurity.shape)
    lo, hi = xs[pos, feat], xs[pos + 1, feat]
    threshold = (lo + hi) / 2
    if threshold >= hi:
        threshold = lo
    return int(feat), float(threshold)


def fit_tree(
    x: NDArray[np.float64], y: NDArray[np.int64], max_splits: int = 200_000
) -> DecisionTree:
    """Grow a tree depth-first until leaves are pure or `max_splits` is reached."""
    if len(y) == 0:
        raise DetectionError("Cannot fit a tree on an empty dataset")

    feature, threshold, left, right, value = [], [], [], [], []

    def new_node(idx: NDArray[np.int64]) -> int:
        feature.append(LEAF)
        threshold.append(0.0)
        left.append(LEAF)
        right.append(LEAF)
        value.append(_majority(y[idx]))
        return len(feature) - 1

    stack = [(new_node(np.arange(len(y))), np.arange(len(y)))]
    splits = 0
    while stack and splits < max_splits:
        node, idx = stack.pop()
        labels = y[idx]
        if labels.min() == labels.max():
            continue
        split = _best_split(x[idx], labels)
        if split is None:
            continue

        feat, thr = split
        mask = x[idx, feat] <= thr
        lo, hi = new_node(idx[mask]), new_node(idx[~mask])
        feature[node], threshold[node] = feat, thr
        left[node], right[node] = lo, hi
        splits += 1
        stack.append((hi, idx[~mask]))
        stack.append((lo, idx[mask]))

    return DecisionTree(
        feature=np.asarray(feature, dtype=np.int64),
        threshold=np.asarray(threshold, dtype=np.float64),
        left=np.asarray(left, dtype=np.int64),
        right=np.asarray(right, dtype=np.int64),
        value=np.asarray(value, dtype=np.int64),
    )


@dataclass
class BaggedTreesModel:
    """Trees fit on independent bootstrap resamples, combined by hard voting."""

    trees: list[DecisionTree]
    seeds: list[int] = field(default_factory=list)

    def votes(self, x: NDArray[np.float64]) -> NDArray[np.int64]:
        """Per-tree labels, shape (n_trees, n_samples)."""
        return np.stack([tree.predict(x) for tree in self.trees])

    def predict(self, x: NDArray[np.float64]) -> NDArray[np.int64]:
        """Class with the most tree votes; ties go to class 0."""
        ones = self.votes(x).sum(axis=0)
        return (ones > len(self.trees) - ones).astype(np.int64)


def train_bagged_trees(
    x: NDArray[np.float64],
    y: NDArray[np.int64],
    n_learners: int = 30,
    max_splits: int = 200_000,
    seed: int = 42,
    progress: bool = False,
) -> BaggedTreesModel:
    """Fit `n_learners` trees on bootstrap resamples of the full dataset size.

    Raises:
        DetectionError: If the dataset is empty.
    """
    if len(y) == 0:
        raise DetectionError("Cannot train on an empty dataset")
    if n_learners < 1:
        raise DetectionError("Need at least one learner")

    seeds = np.random.default_rng(seed).integers(0, 2**31 - 1, size=n_learners)
    trees = []
    for s in tqdm(seeds, desc="Bagging trees", disable=not progress):
        idx = np.random.default_rng(int(s)).integers(0, len(y), size=len(y))
        trees.append(fit_tree(x[idx], y[idx], max_splits))

    logger.debug(f"Bagged {n_learners} trees, {sum(t.n_splits for t in trees)} splits")
    return BaggedTreesModel(trees=trees, seeds=[int(s) for s in seeds])
