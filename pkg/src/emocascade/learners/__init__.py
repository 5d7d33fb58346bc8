"""From-scratch classifiers used at every cascade stage."""

from .forest import ForestParams, RandomForestClassifier, fit_forest, predict_proba_forest
from .preprocessing import Standardizer, apply_standardizer, fit_standardizer
from .svm import SvmParams, SVMClassifier, fit_svm_binary, fit_svm_multiclass, predict_svm
from .tree import DecisionTreeClassifier, Tree, TreeParams, fit_tree, gini, predict_tree

LEARNERS = {
    "tree": DecisionTreeClassifier,
    "forest": RandomForestClassifier,
    "svm": SVMClassifier,
}


def make_learner(kind, **params):
    """Instantiate a learner by name (``tree``, ``forest`` or ``svm``)."""
    try:
        cls = LEARNERS[kind]
    except KeyError:
        raise ValueError(f"unknown learner {kind!r}; expected one of {sorted(LEARNERS)}") from None
    return cls(**params)


def learner_from_dict(data):
    return LEARNERS[data["kind"]].from_dict(data)


__all__ = [
    "DecisionTreeClassifier", "ForestParams", "LEARNERS", "RandomForestClassifier", "SVMClassifier",
    "Standardizer", "SvmParams", "Tree", "TreeParams", "apply_standardizer", "fit_forest",
    "fit_standardizer", "fit_svm_binary", "fit_svm_multiclass", "fit_tree", "gini",
    "learner_from_dict", "make_learner", "predict_proba_forest", "predict_svm", "predict_tree",
]
