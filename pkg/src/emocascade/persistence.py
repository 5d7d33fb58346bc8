"""Versioned JSON model files."""

from __future__ import annotations

import json
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

from . import __version__
from .cascade import CascadeClassifier
from .exceptions import ConfigMismatch, IoFailure, MissingFile, UnknownFormatVersion
from .learners import learner_from_dict
from .mfcc import MfccConfig

FORMAT_VERSION = 1


@dataclass
class ModelFile:
    model: object
    mfcc_config: MfccConfig
    mode: str
    seeds: dict = field(default_factory=dict)
    feature_fingerprint: str = ""
    format_version: int = FORMAT_VERSION
    created_with: str = f"emocascade {__version__}"

    def __post_init__(self):
        if not self.feature_fingerprint:
            self.feature_fingerprint = self.mfcc_config.fingerprint(self.model.n_features_in_)

    def check_fingerprint(self, config, n_features=None):
        """Raise ConfigMismatch unless ``config`` reproduces the model's features."""
        expected = config.fingerprint(n_features)
        if expected != self.feature_fingerprint:
            raise ConfigMismatch(
                f"feature fingerprint {expected} does not match model fingerprint "
                f"{self.feature_fingerprint} (model MFCC config: {self.mfcc_config.to_dict()})")

    def to_dict(self):
        return {
            "format_version": self.format_version,
            "created_with": self.created_with,
            "mode": self.mode,
            "mfcc_config": self.mfcc_config.to_dict(),
            "feature_fingerprint": self.feature_fingerprint,
            "seeds": self.seeds,
            "payload": self.model.to_dict(),
        }

    def dumps(self):
        return json.dumps(self.to_dict(), separators=(",", ":"), allow_nan=False) + "\n"


def atomic_write_text(path, text):
    """Write ``text`` to a sibling temp file, then rename over ``path``."""
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
        try:
            with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
            os.replace(tmp, path)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def save_model(path, model_file):
    atomic_write_text(path, model_file.dumps())


def load_model(path):
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise MissingFile(f"no such model file: {path}") from None
    except (OSError, ValueError) as exc:
        raise IoFailure(f"cannot read model file {path}: {exc}") from exc
    version = data.get("format_version")
    if version != FORMAT_VERSION:
        raise UnknownFormatVersion(f"{path}: model format version {version!r} (supported: {FORMAT_VERSION})")
    payload = data["payload"]
    if data["mode"] == "cascade":
        model = CascadeClassifier.from_dict(payload)
    else:
        model = learner_from_dict(payload)
        model.fingerprint_ = data["feature_fingerprint"]
    return ModelFile(
        model=model,
        mfcc_config=MfccConfig.from_dict(data["mfcc_config"]),
        mode=data["mode"],
        seeds=data.get("seeds", {}),
        feature_fingerprint=data["feature_fingerprint"],
        format_version=version,
        created_with=data.get("created_with", ""),
    )
