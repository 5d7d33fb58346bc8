"""Splitting, confusion matrices, stage-wise and end-to-end reports."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .cascade import STAGE_VOCABULARY, STAGES, relabel_for_stage
from .corpus import EMOTIONS
from .exceptions import (
    ConfigMismatch,
    EmptyClass,
    EmptyStage,
    LengthMismatch,
    TooFewSamples,
    TooFewSpeakers,
    UnknownLabel,
)

# ---------------------------------------------------------------------------
# Splits


@dataclass(frozen=True)
class SplitSpec:
    test_fraction: float = 0.25
    stratified: bool = True
    mode: str = "random"
    seed: int = 0
    holdout_speaker: str | None = None

    def __post_init__(self):
        if not 0.0 < self.test_fraction < 1.0:
            raise ValueError("test_fraction must lie in (0, 1)")
        if self.mode not in ("random", "leave-one-speaker-out"):
            raise ValueError(f"unknown split mode {self.mode!r}")

    def to_dict(self):
        return asdict(self)


def _n_test(n, fraction):
    return min(n - 1, max(1, int(np.floor(fraction * n + 0.5))))


def stratified_split(labels, spec=None, speakers=None):
    """Return sorted ``(train_indices, test_indices)``.

    Random mode draws each class's test share independently from one seeded
    generator (classes visited in sorted order). Speaker mode holds out every
    utterance of ``spec.holdout_speaker``, or of a seeded random speaker.
    """
    spec = spec or SplitSpec()
    labels = np.asarray(labels)
    rng = np.random.default_rng(spec.seed)
    n = len(labels)

    if spec.mode == "leave-one-speaker-out":
        if speakers is None:
            raise TooFewSpeakers("speaker split needs speaker ids")
        speakers = np.asarray(speakers)
        unique = sorted(set(speakers.tolist()))
        if len(unique) < 2:
            raise TooFewSpeakers(f"need at least 2 speakers, got {unique}")
        held = spec.holdout_speaker
        if held is None:
            held = unique[int(rng.integers(len(unique)))]
        elif held not in unique:
            raise TooFewSpeakers(f"speaker {held!r} not present in dataset")
        test = speakers == held
        return np.flatnonzero(~test), np.flatnonzero(test)

    if not spec.stratified:
        if n < 2:
            raise TooFewSamples("need at least 2 samples to split")
        perm = rng.permutation(n)
        k = _n_test(n, spec.test_fraction)
        return np.sort(perm[k:]), np.sort(perm[:k])

    test = []
    for label in sorted(set(labels.tolist())):
        idx = np.flatnonzero(labels == label)
        if len(idx) < 2:
            raise TooFewSamples(f"class {label!r} has {len(idx)} sample(s); need at least 2")
        perm = rng.permutation(idx)
        test.extend(perm[:_n_test(len(idx), spec.test_fraction)])
    mask = np.zeros(n, dtype=bool)
    mask[test] = True
    return np.flatnonzero(~mask), np.flatnonzero(mask)


# ---------------------------------------------------------------------------
# Confusion matrices


def format_percent(value):
    """Table-style cell: ``0`` for none, ``100%``, ``73.3%``."""
    if value == 0:
        return "0"
    r = round(float(value), 1)
    return f"{int(r)}%" if r == int(r) else f"{r:.1f}%"


@dataclass
class ConfusionMatrix:
    labels: tuple
    counts: np.ndarray  # rows = truth, columns = predicted

    @property
    def total(self):
        return int(self.counts.sum())

    def row_totals(self):
        return self.counts.sum(axis=1)

    def recalls(self):
        """Per-class recall; NaN for classes absent from the truth."""
        totals = self.row_totals().astype(np.float64)
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(totals > 0, np.diag(self.counts) / totals, np.nan)

    def recall_dict(self):
        return {lab: (None if np.isnan(r) else float(r)) for lab, r in zip(self.labels, self.recalls())}

    def accuracy(self):
        return float(np.trace(self.counts) / self.total) if self.total else float("nan")

    def row_percentages(self):
        totals = self.row_totals()[:, None].astype(np.float64)
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(totals > 0, 100.0 * self.counts / totals, 0.0)

    def render(self, title=None):
        names = [lab.capitalize() for lab in self.labels]
        head = ["Emotion class"] + names
        rows = [[name] + [format_percent(v) for v in pct]
                for name, pct in zip(names, self.row_percentages())]
        widths = [max(len(r[c]) for r in [head] + rows) for c in range(len(head))]
        lines = [title] if title else []
        for r in [head] + rows:
            lines.append("  ".join(cell.ljust(w) if c == 0 else cell.rjust(w)
                                   for c, (cell, w) in enumerate(zip(r, widths))).rstrip())
        return "\n".join(lines)

    def to_csv(self):
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["truth"] + list(self.labels))
        for lab, row in zip(self.labels, self.counts):
            writer.writerow([lab] + [int(v) for v in row])
        return buf.getvalue()

    def to_dict(self):
        return {"labels": list(self.labels), "counts": self.counts.astype(int).tolist()}

    @classmethod
    def from_dict(cls, data):
        return cls(tuple(data["labels"]), np.asarray(data["counts"], dtype=np.int64))

    def __eq__(self, other):
        return (isinstance(other, ConfusionMatrix) and self.labels == other.labels
                and np.array_equal(self.counts, other.counts))


def confusion_matrix(truth, predicted, vocabulary=EMOTIONS):
    truth = list(truth)
    predicted = list(predicted)
    if len(truth) != len(predicted):
        raise LengthMismatch(f"{len(truth)} true labels but {len(predicted)} predictions")
    index = {lab: i for i, lab in enumerate(vocabulary)}
    counts = np.zeros((len(vocabulary), len(vocabulary)), dtype=np.int64)
    for t, p in zip(truth, predicted):
        try:
            counts[index[t], index[p]] += 1
        except KeyError as exc:
            raise UnknownLabel(f"label {exc.args[0]!r} not in vocabulary {list(vocabulary)}") from None
    return ConfusionMatrix(tuple(vocabulary), counts)


def macro_accuracy(cm, exclude=()):
    """Unweighted mean recall over the classes not in ``exclude``."""
    exclude = set(exclude)
    recalls = []
    for lab, total, hit in zip(cm.labels, cm.row_totals(), np.diag(cm.counts)):
        if lab in exclude:
            continue
        if total <= 0:
            raise EmptyClass(f"class {lab!r} has no test samples")
        recalls.append(hit / total)
    if not recalls:
        raise EmptyClass("every class was excluded")
    return float(np.mean(recalls))


# ---------------------------------------------------------------------------
# Stage reports


@dataclass
class StageReport:
    stage: str
    n_samples: int
    confusion: ConfusionMatrix

    @property
    def recalls(self):
        return self.confusion.recall_dict()

    @property
    def overall(self):
        """Sample-weighted stage accuracy."""
        return self.confusion.accuracy()

    @property
    def macro(self):
        return float(np.nanmean(self.confusion.recalls()))

    def to_dict(self):
        return {"stage": self.stage, "n_samples": self.n_samples, "recalls": self.recalls,
                "overall_accuracy": self.overall, "macro_accuracy": self.macro,
                "confusion": self.confusion.to_dict()}

    @classmethod
    def from_dict(cls, data):
        return cls(data["stage"], data["n_samples"], ConfusionMatrix.from_dict(data["confusion"]))

    def render(self):
        parts = ", ".join(f"{lab} {format_percent(100 * r)}"
                          for lab, r in self.recalls.items() if r is not None)
        return (f"Stage {self.stage} (n={self.n_samples}): {parts}; "
                f"overall {format_percent(100 * self.overall)}")


def stage_reports(model, X, y):
    """Evaluate every stage model on the ground-truth subset that reaches it.

    Upstream mistakes do not leak into these reports, unlike the end-to-end
    matrix.
    """
    X = np.asarray(X, dtype=np.float64)
    reports = []
    for stage in STAGES:
        truth = [relabel_for_stage(v, stage) for v in y]
        rows = [i for i, t in enumerate(truth) if t is not None]
        if not rows:
            raise EmptyStage(f"no test samples reach stage {stage}")
        pred = model.models_[stage].predict(X[rows])
        cm = confusion_matrix([truth[i] for i in rows], [str(p) for p in pred], STAGE_VOCABULARY[stage])
        reports.append(StageReport(stage, len(rows), cm))
    return reports


def end_to_end_confusion(model, X, y):
    return confusion_matrix(list(y), [str(p) for p in model.predict(X)], EMOTIONS)


# ---------------------------------------------------------------------------
# Reports


def _dumps(data):
    return json.dumps(data, indent=2, sort_keys=False, allow_nan=False) + "\n"


@dataclass
class EvaluationReport:
    confusion: ConfusionMatrix
    stages: list
    exclude: tuple = ()
    config: dict = field(default_factory=dict)

    @property
    def macro_accuracy(self):
        return macro_accuracy(self.confusion, self.exclude)

    def to_dict(self):
        return {
            "kind": "evaluation",
            "config": self.config,
            "exclude": list(self.exclude),
            "end_to_end": {"confusion": self.confusion.to_dict(), "recalls": self.confusion.recall_dict(),
                           "macro_accuracy": self.macro_accuracy},
            "stages": [s.to_dict() for s in self.stages],
        }

    def to_json(self):
        return _dumps(self.to_dict())

    @classmethod
    def from_dict(cls, data):
        return cls(ConfusionMatrix.from_dict(data["end_to_end"]["confusion"]),
                   [StageReport.from_dict(s) for s in data["stages"]],
                   tuple(data["exclude"]), data["config"])

    def render_text(self):
        lines = ["Stage-wise performance (ground-truth routing)"]
        lines += [s.render() for s in self.stages]
        lines += ["", self.confusion.render("End-to-end confusion (rows = truth, row %)"), "",
                  f"Macro accuracy: {100 * self.macro_accuracy:.2f}%" + _excl(self.exclude), "",
                  _config_echo(self.config)]
        return "\n".join(lines) + "\n"


@dataclass
class ComparisonReport:
    cascade: ConfusionMatrix
    flat: ConfusionMatrix
    exclude: tuple = ()
    config: dict = field(default_factory=dict)
    stages: list = field(default_factory=list)

    @property
    def cascade_macro(self):
        return macro_accuracy(self.cascade, self.exclude)

    @property
    def flat_macro(self):
        return macro_accuracy(self.flat, self.exclude)

    def to_dict(self):
        return {
            "kind": "comparison",
            "config": self.config,
            "exclude": list(self.exclude),
            "cascade": {"confusion": self.cascade.to_dict(), "recalls": self.cascade.recall_dict(),
                        "macro_accuracy": self.cascade_macro},
            "flat": {"confusion": self.flat.to_dict(), "recalls": self.flat.recall_dict(),
                     "macro_accuracy": self.flat_macro},
            "stages": [s.to_dict() for s in self.stages],
        }

    def to_json(self):
        return _dumps(self.to_dict())

    @classmethod
    def from_dict(cls, data):
        return cls(ConfusionMatrix.from_dict(data["cascade"]["confusion"]),
                   ConfusionMatrix.from_dict(data["flat"]["confusion"]),
                   tuple(data["exclude"]), data["config"],
                   [StageReport.from_dict(s) for s in data.get("stages", [])])

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))

    def render_text(self):
        lines = [self.flat.render("Single multiclass classifier (rows = truth, row %)"), "",
                 self.cascade.render("Divide-and-conquer cascade (rows = truth, row %)"), ""]
        if self.stages:
            lines += ["Stage-wise performance (ground-truth routing)"]
            lines += [s.render() for s in self.stages] + [""]
        lines += [f"{'Emotion':<10}{'Cascade':>10}{'Flat':>10}"]
        for lab, rc, rf in zip(self.cascade.labels, self.cascade.recalls(), self.flat.recalls()):
            lines.append(f"{lab.capitalize():<10}{_pct(rc):>10}{_pct(rf):>10}")
        lines.append(f"{'Overall':<10}{100 * self.cascade_macro:>10.2f}{100 * self.flat_macro:>10.2f}"
                     + _excl(self.exclude))
        lines += ["", _config_echo(self.config)]
        return "\n".join(lines) + "\n"


def _pct(r):
    return "-" if np.isnan(r) else f"{100 * r:.1f}"


def _excl(exclude):
    return f" (excluding {', '.join(exclude)})" if exclude else ""


def _config_echo(config):
    return "Config: " + json.dumps(config, sort_keys=True)


def evaluate(cascade, X, y, exclude=(), config=None):
    return EvaluationReport(end_to_end_confusion(cascade, X, y), stage_reports(cascade, X, y),
                            tuple(exclude), dict(config or {}))


def compare(cascade, flat, X, y, exclude=(), config=None):
    """Cascade and flat arms on the identical test set."""
    fp_c = getattr(cascade, "fingerprint_", None)
    fp_f = getattr(flat, "fingerprint_", None)
    if fp_c is not None and fp_f is not None and fp_c != fp_f:
        raise ConfigMismatch(f"cascade fingerprint {fp_c} differs from flat fingerprint {fp_f}")
    if cascade.n_features_in_ != flat.n_features_in_:
        raise ConfigMismatch(f"cascade uses {cascade.n_features_in_} features, flat uses {flat.n_features_in_}")
    flat_cm = confusion_matrix(list(y), [str(p) for p in flat.predict(X)], EMOTIONS)
    stages = stage_reports(cascade, X, y) if hasattr(cascade, "models_") else []
    cascade_cm = (end_to_end_confusion(cascade, X, y) if hasattr(cascade, "models_")
                  else confusion_matrix(list(y), [str(p) for p in cascade.predict(X)], EMOTIONS))
    return ComparisonReport(cascade_cm, flat_cm, tuple(exclude), dict(config or {}), stages)
