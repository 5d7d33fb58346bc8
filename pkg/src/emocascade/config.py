"""Run configuration: defaults, overridden by a JSON file, overridden by flags."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from .evaluation import SplitSpec
from .exceptions import IoFailure, MissingFile
from .mfcc import MfccConfig

SEEDED_LEARNERS = ("forest", "svm")


@dataclass
class RunConfig:
    mfcc: dict = field(default_factory=dict)
    learner: str = "forest"
    learner_params: dict = field(default_factory=dict)
    split: dict = field(default_factory=dict)
    mode: str = "cascade"
    seed: int = 0
    exclude: list = field(default_factory=list)

    def __post_init__(self):
        if self.mode not in ("cascade", "flat"):
            raise ValueError(f"mode must be 'cascade' or 'flat', got {self.mode!r}")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        # validate eagerly so bad values surface as usage errors
        self.mfcc_config()
        self.split_spec()

    def mfcc_config(self):
        return MfccConfig.from_dict(self.mfcc)

    def split_spec(self):
        return SplitSpec(**{"seed": self.seed, **self.split})

    def resolved_learner_params(self):
        params = dict(self.learner_params)
        if self.learner in SEEDED_LEARNERS:
            params.setdefault("seed", self.seed)
        return params

    def echo(self):
        """Every effective setting, suitable for writing back as a config file."""
        return {
            "mfcc": self.mfcc_config().to_dict(),
            "learner": self.learner,
            "learner_params": self.resolved_learner_params(),
            "split": self.split_spec().to_dict(),
            "mode": self.mode,
            "seed": self.seed,
            "exclude": list(self.exclude),
        }

    def to_dict(self):
        return asdict(self)


def load_run_config(path=None, overrides=None):
    """Merge defaults <- JSON file <- ``overrides`` (section dicts merge key-wise)."""
    data = {}
    if path is not None:
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except FileNotFoundError:
            raise MissingFile(f"no such config file: {path}") from None
        except (OSError, ValueError) as exc:
            raise IoFailure(f"cannot read config {path}: {exc}") from exc
        known = {f.name for f in fields(RunConfig)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
    for key, value in (overrides or {}).items():
        if value is None:
            continue
        if isinstance(value, dict):
            data[key] = {**data.get(key, {}), **value}
        else:
            data[key] = value
    return RunConfig(**data)
