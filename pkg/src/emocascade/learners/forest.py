"""Random forest: bagged CART trees with per-node feature subsampling."""

import math
from dataclasses import dataclass, field

import numpy as np
from joblib import Parallel, delayed

from .base import BaseLearner
from .tree import Tree, TreeParams, grow_tree


@dataclass(frozen=True)
class ForestParams:
    n_trees: int = 100
    max_features: str | int = "sqrt"
    bootstrap: bool = True
    tree_params: TreeParams = field(default_factory=TreeParams)
    seed: int = 0

    def __post_init__(self):
        if self.n_trees < 1:
            raise ValueError("n_trees must be >= 1")

    def resolve_max_features(self, n_features):
        if self.max_features == "sqrt":
            k = max(1, int(math.isqrt(n_features)))
        else:
            k = int(self.max_features)
        if not 1 <= k <= n_features:
            raise ValueError(f"max_features={self.max_features!r} outside [1, {n_features}]")
        return k


def _fit_one_tree(X, y, n_classes, params, k, tree_index):
    # Each tree owns a generator derived from (seed, tree index): training order is irrelevant.
    rng = np.random.default_rng([params.seed, tree_index])
    n, d = X.shape
    sample = rng.integers(0, n, size=n) if params.bootstrap else np.arange(n)

    def sampler(depth):
        return rng.choice(d, size=k, replace=False)

    return grow_tree(X, y, n_classes, params.tree_params, sampler, sample_indices=sample)


def fit_forest_trees(X, y, params, n_classes=None, n_jobs=None):
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    n_classes = int(y.max()) + 1 if n_classes is None else n_classes
    k = params.resolve_max_features(X.shape[1])
    if n_jobs in (None, 1):
        return [_fit_one_tree(X, y, n_classes, params, k, i) for i in range(params.n_trees)]
    return Parallel(n_jobs=n_jobs)(
        delayed(_fit_one_tree)(X, y, n_classes, params, k, i) for i in range(params.n_trees))


def forest_votes(trees, X, n_classes):
    """Fraction of trees voting for each class (hard votes)."""
    votes = np.zeros((len(X), n_classes), dtype=np.float64)
    rows = np.arange(len(X))
    for tree in trees:
        votes[rows, tree.predict_index(X)] += 1.0
    return votes / len(trees)


class RandomForestClassifier(BaseLearner):
    """Bagged Gini trees; ``predict_proba`` returns the tree vote shares."""

    kind = "forest"

    def __init__(self, n_trees=100, max_features="sqrt", bootstrap=True, max_depth=10,
                 min_samples_leaf=1, seed=0, standardize=True, n_jobs=None):
        self.n_trees = n_trees
        self.max_features = max_features
        self.bootstrap = bootstrap
        self.max_depth = max_depth
        self.min_samples_leaf = min_samples_leaf
        self.seed = seed
        self.standardize = standardize
        self.n_jobs = n_jobs

    @property
    def forest_params(self):
        return ForestParams(
            n_trees=self.n_trees, max_features=self.max_features, bootstrap=self.bootstrap,
            tree_params=TreeParams(self.max_depth, self.min_samples_leaf), seed=self.seed)

    def _fit_encoded(self, X, y):
        self.trees_ = fit_forest_trees(X, y, self.forest_params, len(self.classes_), self.n_jobs)

    def _proba(self, Xs):
        return forest_votes(self.trees_, Xs, len(self.classes_))

    def to_dict(self):
        data = super().to_dict()
        data["params"].pop("n_jobs")
        return data

    def _payload_to_dict(self):
        return {"trees": [t.to_dict() for t in self.trees_]}

    def _payload_from_dict(self, payload):
        self.trees_ = [Tree.from_dict(t) for t in payload["trees"]]


def fit_forest(X, y, params=None, n_classes=None):
    """Functional form: list of fitted trees on integer labels."""
    return fit_forest_trees(X, y, params or ForestParams(), n_classes)


def predict_proba_forest(trees, x, n_classes=None):
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    n_classes = trees[0].n_classes if n_classes is None else n_classes
    proba = forest_votes(trees, x, n_classes)
    return proba[0] if len(proba) == 1 else proba
