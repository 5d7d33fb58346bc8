import json

import numpy as np
import pytest
from sklearn.pipeline import make_pipeline

from emocascade.cascade import (
    NEGATIVE,
    POSITIVE,
    STAGE_VOCABULARY,
    STAGES,
    CascadeClassifier,
    CascadePrediction,
    StageDecision,
    predict_cascade,
    predict_flat,
    relabel_for_stage,
    train_cascade,
    train_flat,
)
from emocascade.corpus import EMOTIONS, SynthSpec, iter_synthetic_corpus, AudioClip
from emocascade.exceptions import ConfigMismatch, DimensionMismatch, MissingClass
from emocascade.evaluation import confusion_matrix
from emocascade.mfcc import MfccFeaturizer


class StubStage:
    """Stage model with scripted decisions that records every row it sees."""

    def __init__(self, classes, rng=None, fixed=None, confidence=1.0):
        self.classes_ = np.asarray(sorted(classes))
        self.rng = rng
        self.fixed = fixed
        self.confidence = confidence
        self.rows_seen = 0
        self.last = None

    def _draw(self, X):
        n = len(X)
        if self.fixed is not None:
            idx = np.full(n, int(np.searchsorted(self.classes_, self.fixed)))
            conf = np.full(n, self.confidence)
        else:
            idx = self.rng.integers(len(self.classes_), size=n)
            conf = self.rng.uniform(0.3, 1.0, size=n)
        self.last = (idx, conf)
        return idx, conf

    def predict(self, X):
        self.rows_seen += len(X)
        idx, _ = self._draw(X)
        return self.classes_[idx]

    def predict_proba(self, X):
        idx, conf = self.last
        proba = np.zeros((len(X), len(self.classes_)))
        proba[np.arange(len(X)), idx] = conf
        return proba


def stubbed_cascade(models, n_features=2):
    model = CascadeClassifier()
    model.classes_ = np.asarray(EMOTIONS)
    model.n_features_in_ = n_features
    model.fingerprint_ = None
    model.stage_sizes_ = {}
    model.models_ = models
    return model


def balanced(n_per_class, dim=4, seed=0):
    rng = np.random.default_rng(seed)
    y = np.repeat(EMOTIONS, n_per_class)
    X = rng.normal(size=(len(y), dim)) + np.repeat(np.arange(7), n_per_class)[:, None] * 3.0
    return X, y


# --- relabel ---------------------------------------------------------------------

def test_relabel_examples():
    assert relabel_for_stage("happy", "2") == "positive"
    assert relabel_for_stage("neutral", "1") == "neutral"
    assert relabel_for_stage("neutral", "2") is None
    assert relabel_for_stage("sad", "1") == "emotional"
    assert relabel_for_stage("sad", "3P") is None
    assert relabel_for_stage("Fear", "3N") == "fear"
    with pytest.raises(ValueError):
        relabel_for_stage("sad", "4")


def test_partition_is_exact():
    assert set(POSITIVE) | set(NEGATIVE) | {"neutral"} == set(EMOTIONS)
    assert not set(POSITIVE) & set(NEGATIVE)


# --- training --------------------------------------------------------------------

def test_stage_sizes_and_vocabularies():
    X, y = balanced(10)
    model = train_cascade(X, y, "tree")
    assert model.stage_sizes_ == {"1": 70, "2": 60, "3P": 20, "3N": 40}
    assert len(model.models_) == 4
    for stage in STAGES:
        assert tuple(model.models_[stage].classes_) == STAGE_VOCABULARY[stage]


def test_missing_class():
    X, y = balanced(10)
    keep = y != "surprise"
    with pytest.raises(MissingClass) as err:
        train_cascade(X[keep], y[keep])
    assert err.value.label == "surprise"
    with pytest.raises(MissingClass):
        train_flat(X[keep], y[keep])


def test_stage_trained_on_ground_truth_subset():
    X, y = balanced(10)
    model = train_cascade(X, y, "tree", {"max_depth": None})
    # fully grown trees reproduce their own training labels at each stage
    neg = np.isin(y, NEGATIVE)
    assert np.array_equal(model.models_["3N"].predict(X[neg]), y[neg])


# --- prediction contracts ---------------------------------------------------------

def test_early_exit_counts_no_downstream_rows():
    rng = np.random.default_rng(0)
    models = {"1": StubStage(STAGE_VOCABULARY["1"], fixed="neutral"),
              **{s: StubStage(STAGE_VOCABULARY[s], rng=rng) for s in ("2", "3P", "3N")}}
    model = stubbed_cascade(models)
    preds = model.predict_paths(np.zeros((25, 2)))
    assert all(p.label == "neutral" and len(p.path) == 1 and p.confidence == 1.0 for p in preds)
    assert [models[s].rows_seen for s in ("2", "3P", "3N")] == [0, 0, 0]


def test_confidence_product_example():
    path = (StageDecision("1", "emotional", 0.9), StageDecision("2", "negative", 0.8),
            StageDecision("3N", "angry", 0.5))
    assert CascadePrediction("angry", path).confidence == pytest.approx(0.36, abs=1e-12)


def test_routing_soundness_randomized():
    rng = np.random.default_rng(1)
    models = {s: StubStage(STAGE_VOCABULARY[s], rng=rng) for s in STAGES}
    model = stubbed_cascade(models)
    preds = model.predict_paths(np.zeros((10_000, 2)))
    n_neutral = 0
    for p in preds:
        stages = [step.stage for step in p.path]
        if p.path[0].decision == "neutral":
            n_neutral += 1
            assert p.label == "neutral" and stages == ["1"]
            continue
        polarity = p.path[1].decision
        expected = "3P" if polarity == "positive" else "3N"
        assert stages == ["1", "2", expected]
        assert p.label in STAGE_VOCABULARY[expected]
        assert p.label == p.path[2].decision
        assert abs(p.confidence - np.prod([s.confidence for s in p.path])) <= 1e-12
    # stage-2/3 models only ever saw routed rows
    assert models["2"].rows_seen == 10_000 - n_neutral
    assert models["3P"].rows_seen + models["3N"].rows_seen == models["2"].rows_seen


def test_happy_synthetic_path(small_table):
    t = small_table
    model = train_cascade(t.X, t.labels)
    happy = [p for p in model.predict_paths(t.X[t.labels == "happy"]) if p.label == "happy"]
    assert happy
    for p in happy:
        assert [(s.stage, s.decision) for s in p.path] == [("1", "emotional"), ("2", "positive"), ("3P", "happy")]
        assert 0.0 < p.confidence <= 1.0
    one = predict_cascade(model, t.X[0])
    assert one.label in EMOTIONS


def test_flat_baseline_confusion(small_table):
    t = small_table
    flat = train_flat(t.X, t.labels, "forest", {"n_trees": 20})
    assert tuple(flat.classes_) == tuple(sorted(EMOTIONS))
    cm = confusion_matrix(t.labels, flat.predict(t.X))
    assert cm.counts.shape == (7, 7)
    label, proba = predict_flat(flat, t.X[0])
    assert label in EMOTIONS and proba.sum() == pytest.approx(1.0)


def test_heterogeneous_and_round_trip(small_table):
    t = small_table
    model = CascadeClassifier("forest", {"n_trees": 10}, stage_learners={"1": ("svm", {}), "3N": ("tree", {})})
    model.fit(t.X, t.labels, fingerprint="abc")
    assert model.models_["1"].kind == "svm" and model.models_["3N"].kind == "tree"
    assert model.models_["2"].kind == "forest"
    restored = CascadeClassifier.from_dict(json.loads(json.dumps(model.to_dict())))
    a = [p.to_dict() for p in model.predict_paths(t.X)]
    b = [p.to_dict() for p in restored.predict_paths(t.X, fingerprint="abc")]
    assert a == b
    with pytest.raises(ConfigMismatch):
        restored.predict_paths(t.X, fingerprint="xyz")
    with pytest.raises(DimensionMismatch):
        restored.predict(t.X[:, :5])


def test_pipeline_from_raw_clips():
    spec = SynthSpec(utterances_per_class=6, seed=3)
    clips, labels = [], []
    for _, label, _, x in iter_synthetic_corpus(spec):
        clips.append(AudioClip(x, spec.sample_rate_hz))
        labels.append(label)
    pipe = make_pipeline(MfccFeaturizer(), CascadeClassifier("tree"))
    pipe.fit(clips, labels)
    pred = pipe.predict(clips)
    assert set(pred) <= set(EMOTIONS)
    assert (pred == np.asarray(labels)).mean() > 0.9
