"""Feature tables: manifest -> pooled MFCC matrix, and the feature CSV format."""

from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .corpus import MANIFEST_HEADER, load_manifest, parse_label, read_wav
from .exceptions import EmoCascadeError, IoFailure, MissingHeader
from .mfcc import MfccConfig, utterance_features

logger = logging.getLogger(__name__)


@dataclass
class FeatureTable:
    paths: list
    labels: np.ndarray
    speakers: np.ndarray
    X: np.ndarray
    skipped: list = field(default_factory=list)

    def __len__(self):
        return len(self.paths)

    def subset(self, idx):
        idx = np.asarray(idx, dtype=np.int64)
        return FeatureTable([self.paths[i] for i in idx], self.labels[idx], self.speakers[idx], self.X[idx])


def extract_features(utterances, config=None, skip_errors=False):
    """Pooled MFCC features for each manifest record.

    Without ``skip_errors`` the first failing file aborts the run; with it,
    failures are logged with their path and left out.
    """
    config = config or MfccConfig()
    paths, labels, speakers, rows = [], [], [], []
    skipped = []
    for utt in utterances:
        try:
            row = utterance_features(read_wav(utt.clip_path), config)
        except EmoCascadeError as exc:
            if not skip_errors:
                raise
            logger.warning("skipping %s: %s", utt.clip_path, exc)
            skipped.append((utt.clip_path, str(exc)))
            continue
        paths.append(utt.clip_path)
        labels.append(utt.label)
        speakers.append(utt.speaker_id)
        rows.append(row)
    X = np.asarray(rows, dtype=np.float64).reshape(len(rows), config.n_features)
    return FeatureTable(paths, np.asarray(labels, dtype=str), np.asarray(speakers, dtype=str), X, skipped)


def features_from_manifest(manifest_path, config=None, skip_errors=False):
    return extract_features(load_manifest(manifest_path), config, skip_errors)


def feature_header(n_features):
    return list(MANIFEST_HEADER) + [f"f{i}" for i in range(n_features)]


def format_features_csv(table):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(feature_header(table.X.shape[1]))
    for path, label, speaker, row in zip(table.paths, table.labels, table.speakers, table.X):
        # repr() round-trips doubles exactly (17 significant digits at most)
        writer.writerow([path, label, speaker] + [repr(float(v)) for v in row])
    return buf.getvalue()


def write_features_csv(path, table):
    try:
        Path(path).write_text(format_features_csv(table), encoding="utf-8", newline="")
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def is_features_csv(path):
    try:
        with open(path, "rb") as fh:
            head = fh.readline(1 << 16)
        if head.startswith(b"RIFF"):
            return False
        header = next(csv.reader([head.decode("utf-8")]), [])
    except (OSError, UnicodeDecodeError):
        return False
    return len(header) > 3 and header[3].strip() == "f0"


def read_features_csv(path):
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header is None or tuple(header[:3]) != MANIFEST_HEADER or header[3:] != feature_header(len(header) - 3)[3:]:
        raise MissingHeader(f"{path}: expected header path,label,speaker,f0,f1,...")
    n_features = len(header) - 3
    paths, labels, speakers, rows = [], [], [], []
    for row in reader:
        if not row:
            continue
        if len(row) != len(header):
            raise MissingHeader(f"{path}: row with {len(row)} fields, expected {len(header)}")
        paths.append(row[0])
        labels.append(parse_label(row[1]))
        speakers.append(row[2])
        rows.append([float(v) for v in row[3:]])
    X = np.asarray(rows, dtype=np.float64).reshape(len(rows), n_features)
    return FeatureTable(paths, np.asarray(labels, dtype=str), np.asarray(speakers, dtype=str), X)
