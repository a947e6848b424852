import numpy as np
import pytest

from grid_isle.detection.trees import (
    LEAF,
    BaggedTreesModel,
    DecisionTree,
    fit_tree,
    train_bagged_trees,
)
from grid_isle.errors import DetectionError


@pytest.fixture(scope="module")
def separable():
    rng = np.random.default_rng(0)
    x = rng.normal(size=(200, 4))
    y = (x[:, 1] + 0.5 * x[:, 2] > 0).astype(np.int64)
    return x, y


def test_tree_fits_training_data(separable):
    x, y = separable
    tree = fit_tree(x, y)
    np.testing.assert_array_equal(tree.predict(x), y)
    assert tree.n_splits > 0


def test_split_cap():
    x = np.arange(10, dtype=np.float64)[:, None]
    y = np.array([0, 1] * 5)
    tree = fit_tree(x, y, max_splits=2)
    assert tree.n_splits == 2


def test_single_class_predicts_that_class():
    x = np.random.default_rng(0).normal(size=(20, 3))
    model = train_bagged_trees(x, np.ones(20, dtype=np.int64), n_learners=5)
    assert (model.predict(x) == 1).all()
    assert all(t.n_splits == 0 for t in model.trees)


def test_bagged_trees_fit_separable_data(separable):
    x, y = separable
    model = train_bagged_trees(x, y, n_learners=30, seed=0)
    assert len(model.trees) == 30
    assert (model.predict(x) == y).mean() >= 0.95


def test_vote_is_the_exhaustive_tally(separable):
    x, y = separable
    model = train_bagged_trees(x, y, n_learners=30, seed=1)
    probe = np.random.default_rng(5).normal(size=(50, 4))
    for row, pred in zip(probe, model.predict(probe)):
        ones = sum(int(tree.predict(row)[0]) for tree in model.trees)
        assert pred == int(ones > 30 - ones)


def test_bagging_is_seeded(separable):
    x, y = separable
    a = train_bagged_trees(x, y, n_learners=3, seed=4)
    b = train_bagged_trees(x, y, n_learners=3, seed=4)
    assert a.seeds == b.seeds
    for ta, tb in zip(a.trees, b.trees):
        np.testing.assert_array_equal(ta.threshold, tb.threshold)


def test_tie_goes_to_class_0():
    def stump(label: int) -> DecisionTree:
        return DecisionTree(
            feature=np.array([LEAF]),
            threshold=np.zeros(1),
            left=np.array([LEAF]),
            right=np.array([LEAF]),
            value=np.array([label]),
        )

    model = BaggedTreesModel([stump(0), stump(1)])
    assert model.predict(np.zeros((1, 2)))[0] == 0


def test_walk_follows_the_thresholds():
    tree = DecisionTree(
        feature=np.array([0, LEAF, LEAF]),
        threshold=np.array([0.5, 0.0, 0.0]),
        left=np.array([1, LEAF, LEAF]),
        right=np.array([2, LEAF, LEAF]),
        value=np.array([0, 0, 1]),
    )
    assert tree.walk(np.array([0.5])) == [0, 1]
    assert tree.walk(np.array([0.6])) == [0, 2]


def test_empty_dataset():
    with pytest.raises(DetectionError):
        train_bagged_trees(np.zeros((0, 2)), np.zeros(0, dtype=np.int64))
