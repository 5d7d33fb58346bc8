"""CART classification tree with Gini impurity."""

from dataclasses import dataclass

import numpy as np

from ..exceptions import DimensionMismatch, EmptyNode
from .base import BaseLearner

_LEAF = -1
# Impurity ties closer than this keep the earlier (lower feature, lower threshold) split.
_TIE_EPS = 1e-12


def gini(counts):
    """Gini impurity ``1 - sum(p_i^2)`` of a class-count vector."""
    counts = np.asarray(counts, dtype=np.float64)
    total = counts.sum()
    if total <= 0:
        raise EmptyNode("gini of an empty node")
    p = counts / total
    return 1.0 - float(np.dot(p, p))


@dataclass(frozen=True)
class TreeParams:
    max_depth: int | None = 10
    min_samples_leaf: int = 1

    def __post_init__(self):
        if self.max_depth is not None and self.max_depth < 1:
            raise ValueError("max_depth must be >= 1")
        if self.min_samples_leaf < 1:
            raise ValueError("min_samples_leaf must be >= 1")


class Tree:
    """Array-backed binary tree.

    Node 0 is the root. Internal nodes send ``x`` left iff
    ``x[feature] <= threshold``; leaves have ``feature == -1`` and carry class
    counts over the full label vocabulary.
    """

    def __init__(self, feature, threshold, left, right, counts):
        self.feature = np.asarray(feature, dtype=np.int64)
        self.threshold = np.asarray(threshold, dtype=np.float64)
        self.left = np.asarray(left, dtype=np.int64)
        self.right = np.asarray(right, dtype=np.int64)
        self.counts = np.asarray(counts, dtype=np.int64)
        self.n_features = None

    @property
    def node_count(self):
        return len(self.feature)

    @property
    def n_classes(self):
        return self.counts.shape[1]

    def is_leaf(self, node):
        return self.feature[node] == _LEAF

    def depth(self):
        depths = np.zeros(self.node_count, dtype=np.int64)
        for node in range(self.node_count):
            if not self.is_leaf(node):
                depths[self.left[node]] = depths[self.right[node]] = depths[node] + 1
        return int(depths.max())

    def apply(self, X):
        """Index of the leaf reached by every row of ``X``."""
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if self.n_features is not None and X.shape[1] != self.n_features:
            raise DimensionMismatch(f"tree expects {self.n_features} features, got {X.shape[1]}")
        node = np.zeros(len(X), dtype=np.int64)
        active = np.flatnonzero(self.feature[node] != _LEAF)
        while active.size:
            cur = node[active]
            go_left = X[active, self.feature[cur]] <= self.threshold[cur]
            node[active] = np.where(go_left, self.left[cur], self.right[cur])
            active = active[self.feature[node[active]] != _LEAF]
        return node

    def leaf_distribution(self, X):
        counts = self.counts[self.apply(X)].astype(np.float64)
        return counts / counts.sum(axis=1, keepdims=True)

    def predict_index(self, X):
        return np.argmax(self.counts[self.apply(X)], axis=1)

    def to_dict(self):
        return {
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "counts": self.counts.tolist(),
            "n_features": self.n_features,
        }

    @classmethod
    def from_dict(cls, data):
        tree = cls(data["feature"], data["threshold"], data["left"], data["right"], data["counts"])
        tree.n_features = data["n_features"]
        return tree


def _best_split(X, y, idx, features, n_classes, min_leaf):
    """Return ``(impurity, feature, threshold)`` of the best split, or None.

    Scans features in ascending order and thresholds in ascending order,
    replacing the incumbent only on a strict improvement.
    """
    n = len(idx)
    best = None
    positions = np.arange(1, n)  # size of the left child for split after sorted row i-1
    ok_size = (positions >= min_leaf) & (n - positions >= min_leaf)
    eye = np.eye(n_classes, dtype=np.float64)
    for f in features:
        order = np.argsort(X[idx, f], kind="stable")
        xs = X[idx[order], f]
        cand = ok_size & (xs[1:] > xs[:-1])
        if not cand.any():
            continue
        left = np.cumsum(eye[y[idx[order]]], axis=0)[:-1]
        right = left[-1] + eye[y[idx[order[-1]]]] - left
        n_left = positions[:, None].astype(np.float64)
        n_right = n - n_left
        g_left = 1.0 - np.sum((left / n_left) ** 2, axis=1)
        g_right = 1.0 - np.sum((right / n_right) ** 2, axis=1)
        weighted = (n_left[:, 0] * g_left + n_right[:, 0] * g_right) / n
        weighted[~cand] = np.inf
        lowest = weighted.min()
        i = int(np.flatnonzero(weighted <= lowest + _TIE_EPS)[0])
        if best is None or weighted[i] < best[0] - _TIE_EPS:
            lo, hi = xs[i], xs[i + 1]
            thr = lo + (hi - lo) / 2.0
            if not lo <= thr < hi:
                thr = lo
            best = (float(weighted[i]), int(f), float(thr))
    return best


def grow_tree(X, y, n_classes, params, feature_sampler=None, sample_indices=None):
    """Greedy depth-first CART growth.

    ``feature_sampler(depth)`` returns the features allowed at a node; when
    omitted every feature is allowed. Nodes are expanded left subtree first so
    a sampler drawing from a generator is consumed in a fixed order.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    idx = np.arange(len(y)) if sample_indices is None else np.asarray(sample_indices, dtype=np.int64)
    all_features = np.arange(X.shape[1])

    feature, threshold, left, right, counts = [], [], [], [], []

    def new_node(node_idx):
        feature.append(_LEAF)
        threshold.append(0.0)
        left.append(_LEAF)
        right.append(_LEAF)
        counts.append(np.bincount(y[node_idx], minlength=n_classes))
        return len(feature) - 1

    def build(node_idx, depth):
        node = new_node(node_idx)
        c = counts[node]
        if np.count_nonzero(c) <= 1:
            return node
        if params.max_depth is not None and depth >= params.max_depth:
            return node
        if len(node_idx) < 2 * params.min_samples_leaf:
            return node
        allowed = all_features if feature_sampler is None else np.sort(feature_sampler(depth))
        split = _best_split(X, y, node_idx, allowed, n_classes, params.min_samples_leaf)
        if split is None:
            return node
        _, f, thr = split
        mask = X[node_idx, f] <= thr
        feature[node] = f
        threshold[node] = thr
        left[node] = build(node_idx[mask], depth + 1)
        right[node] = build(node_idx[~mask], depth + 1)
        return node

    build(idx, 0)
    tree = Tree(feature, threshold, left, right, np.vstack(counts))
    tree.n_features = X.shape[1]
    return tree


def fit_tree(X, y, params=None, allowed_features=None, n_classes=None):
    """Fit a CART tree on integer labels ``y`` (0..n_classes-1)."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if X.ndim != 2 or len(X) != len(y) or len(y) == 0:
        raise DimensionMismatch(f"X has shape {X.shape} but y has {len(y)} labels")
    params = params or TreeParams()
    n_classes = int(y.max()) + 1 if n_classes is None else n_classes
    sampler = None
    if allowed_features is not None:
        fixed = np.asarray(sorted(allowed_features), dtype=np.int64)
        sampler = lambda depth: fixed  # noqa: E731
    return grow_tree(X, y, n_classes, params, sampler)


def predict_tree(tree, x):
    """Label index and leaf class-proportion distribution for one sample."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise DimensionMismatch("predict_tree takes a single feature vector")
    dist = tree.leaf_distribution(x[None, :])[0]
    return int(np.argmax(tree.counts[tree.apply(x[None, :])[0]])), dist


class DecisionTreeClassifier(BaseLearner):
    kind = "tree"

    def __init__(self, max_depth=10, min_samples_leaf=1, standardize=True):
        self.max_depth = max_depth
        self.min_samples_leaf = min_samples_leaf
        self.standardize = standardize

    def _fit_encoded(self, X, y):
        params = TreeParams(self.max_depth, self.min_samples_leaf)
        self.tree_ = fit_tree(X, y, params, n_classes=len(self.classes_))

    def _proba(self, Xs):
        return self.tree_.leaf_distribution(Xs)

    def _predict_index(self, Xs):
        return self.tree_.predict_index(Xs)

    def _payload_to_dict(self):
        return {"tree": self.tree_.to_dict()}

    def _payload_from_dict(self, payload):
        self.tree_ = Tree.from_dict(payload["tree"])
