"""Divide-and-conquer emotion cascade and the flat 7-class baseline.

Routing::

    stage 1   neutral | emotional
    stage 2             positive | negative
    stage 3P            happy | surprise
    stage 3N                       angry | disgust | fear | sad

A stage-1 "neutral" decision ends prediction immediately.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .corpus import EMOTIONS, parse_label
from .exceptions import ConfigMismatch, DimensionMismatch, MissingClass
from .learners import learner_from_dict, make_learner

STAGES = ("1", "2", "3P", "3N")
POSITIVE = ("happy", "surprise")
NEGATIVE = ("angry", "disgust", "fear", "sad")
STAGE_VOCABULARY = {
    "1": ("emotional", "neutral"),
    "2": ("negative", "positive"),
    "3P": POSITIVE,
    "3N": NEGATIVE,
}


def relabel_for_stage(label, stage):
    """Map an emotion to its label at ``stage``; None if it never reaches that stage."""
    label = parse_label(label)
    if stage == "1":
        return "neutral" if label == "neutral" else "emotional"
    if stage == "2":
        if label in POSITIVE:
            return "positive"
        return "negative" if label in NEGATIVE else None
    if stage == "3P":
        return label if label in POSITIVE else None
    if stage == "3N":
        return label if label in NEGATIVE else None
    raise ValueError(f"unknown stage {stage!r}; expected one of {STAGES}")


def check_all_classes(y, classes=EMOTIONS):
    present = set(y)
    for label in classes:
        if label not in present:
            raise MissingClass(label)


@dataclass(frozen=True)
class StageDecision:
    stage: str
    decision: str
    confidence: float


@dataclass(frozen=True)
class CascadePrediction:
    label: str
    path: tuple

    @property
    def confidence(self):
        return math.prod(step.confidence for step in self.path)

    def to_dict(self):
        return {
            "label": self.label,
            "confidence": self.confidence,
            "path": [{"stage": s.stage, "decision": s.decision, "confidence": s.confidence}
                     for s in self.path],
        }


class CascadeClassifier(ClassifierMixin, BaseEstimator):
    """Four-model emotion cascade.

    Parameters
    ----------
    learner : {"forest", "tree", "svm"}
        Learner kind used at every stage.
    learner_params : dict, optional
        Keyword arguments for that learner.
    stage_learners : dict, optional
        Per-stage overrides ``{stage: (kind, params)}`` for heterogeneous
        cascades; stages are ``"1"``, ``"2"``, ``"3P"``, ``"3N"``.

    Each stage model is trained on the ground-truth subset that reaches it,
    never on upstream predictions.
    """

    def __init__(self, learner="forest", learner_params=None, stage_learners=None):
        self.learner = learner
        self.learner_params = learner_params
        self.stage_learners = stage_learners

    def _stage_learner(self, stage):
        overrides = self.stage_learners or {}
        if stage in overrides:
            kind, params = overrides[stage]
            return make_learner(kind, **(params or {}))
        return make_learner(self.learner, **(self.learner_params or {}))

    def fit(self, X, y, fingerprint=None):
        X, y = check_X_y(X, y, dtype=np.float64)
        y = np.asarray([parse_label(v) for v in y])
        check_all_classes(y)
        self.classes_ = np.asarray(EMOTIONS)
        self.n_features_in_ = X.shape[1]
        self.fingerprint_ = fingerprint
        self.models_ = {}
        self.stage_sizes_ = {}
        for stage in STAGES:
            stage_y = np.asarray([relabel_for_stage(v, stage) for v in y], dtype=object)
            mask = stage_y != None  # noqa: E711
            self.models_[stage] = self._stage_learner(stage).fit(X[mask], stage_y[mask].astype(str))
            self.stage_sizes_[stage] = int(mask.sum())
        return self

    def _check(self, X, fingerprint):
        check_is_fitted(self, "models_")
        if fingerprint is not None and self.fingerprint_ is not None and fingerprint != self.fingerprint_:
            raise ConfigMismatch(f"features fingerprint {fingerprint} does not match model {self.fingerprint_}")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.n_features_in_:
            raise DimensionMismatch(f"cascade expects {self.n_features_in_} features, got {X.shape[1]}")
        return X

    @staticmethod
    def _decide(model, X):
        # the model's own decision rule (SVM breaks vote ties by margin), scored by its proba
        labels = model.predict(X)
        idx = np.searchsorted(model.classes_, labels)
        return labels, model.predict_proba(X)[np.arange(len(X)), idx]

    def predict_paths(self, X, fingerprint=None):
        """Full :class:`CascadePrediction` per row.

        Each downstream model only receives the rows routed to it, so rows
        decided neutral at stage 1 never reach stage 2 or 3.
        """
        X = self._check(X, fingerprint)
        n = len(X)
        paths = [[] for _ in range(n)]
        labels = np.empty(n, dtype=object)

        d1, c1 = self._decide(self.models_["1"], X)
        for i in range(n):
            paths[i].append(StageDecision("1", str(d1[i]), float(c1[i])))
        labels[d1 == "neutral"] = "neutral"

        emotional = np.flatnonzero(d1 != "neutral")
        if emotional.size:
            d2, c2 = self._decide(self.models_["2"], X[emotional])
            for k, i in enumerate(emotional):
                paths[i].append(StageDecision("2", str(d2[k]), float(c2[k])))
            for polarity, stage in (("positive", "3P"), ("negative", "3N")):
                rows = emotional[d2 == polarity]
                if not rows.size:
                    continue
                d3, c3 = self._decide(self.models_[stage], X[rows])
                for k, i in enumerate(rows):
                    paths[i].append(StageDecision(stage, str(d3[k]), float(c3[k])))
                    labels[i] = str(d3[k])
        return [CascadePrediction(str(labels[i]), tuple(paths[i])) for i in range(n)]

    def predict_one(self, x, fingerprint=None):
        return self.predict_paths(np.asarray(x, dtype=np.float64)[None, :], fingerprint)[0]

    def predict(self, X):
        return np.asarray([p.label for p in self.predict_paths(X)])

    def to_dict(self):
        check_is_fitted(self, "models_")
        return {
            "kind": "cascade",
            "params": {
                "learner": self.learner,
                "learner_params": self.learner_params,
                "stage_learners": (None if self.stage_learners is None else
                                   {k: [v[0], v[1]] for k, v in sorted(self.stage_learners.items())}),
            },
            "n_features": int(self.n_features_in_),
            "fingerprint": self.fingerprint_,
            "stage_sizes": self.stage_sizes_,
            "models": {stage: self.models_[stage].to_dict() for stage in STAGES},
        }

    @classmethod
    def from_dict(cls, data):
        params = dict(data["params"])
        if params.get("stage_learners") is not None:
            params["stage_learners"] = {k: tuple(v) for k, v in params["stage_learners"].items()}
        obj = cls(**params)
        obj.classes_ = np.asarray(EMOTIONS)
        obj.n_features_in_ = int(data["n_features"])
        obj.fingerprint_ = data["fingerprint"]
        obj.stage_sizes_ = dict(data["stage_sizes"])
        obj.models_ = {stage: learner_from_dict(data["models"][stage]) for stage in STAGES}
        return obj


def train_cascade(X, y, learner="forest", learner_params=None, stage_learners=None, fingerprint=None):
    return CascadeClassifier(learner, learner_params, stage_learners).fit(X, y, fingerprint=fingerprint)


def predict_cascade(model, x, fingerprint=None):
    return model.predict_one(x, fingerprint)


def train_flat(X, y, learner="forest", learner_params=None, fingerprint=None):
    """Single 7-class model over the same features; vocabulary in canonical order."""
    y = np.asarray([parse_label(v) for v in y])
    check_all_classes(y)
    model = make_learner(learner, **(learner_params or {})).fit(X, y)
    model.fingerprint_ = fingerprint
    return model


def predict_flat(model, x):
    proba = model.predict_proba(np.asarray(x, dtype=np.float64)[None, :])[0]
    label = model.predict(np.asarray(x, dtype=np.float64)[None, :])[0]
    return str(label), proba
