"""Speech emotion recognition with a divide-and-conquer classifier cascade."""

__version__ = "0.1.0"

from .cascade import CascadeClassifier, CascadePrediction, relabel_for_stage, train_cascade, train_flat  # noqa: E402
from .corpus import EMOTIONS, AudioClip, SynthSpec, generate_synthetic_corpus, load_manifest, read_wav  # noqa: E402
from .mfcc import MfccConfig, MfccFeaturizer, aggregate, extract_mfcc  # noqa: E402

__all__ = [
    "EMOTIONS", "AudioClip", "CascadeClassifier", "CascadePrediction", "MfccConfig", "MfccFeaturizer",
    "SynthSpec", "aggregate", "extract_mfcc", "generate_synthetic_corpus", "load_manifest", "read_wav",
    "relabel_for_stage", "train_cascade", "train_flat",
]
