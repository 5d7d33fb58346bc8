"""MFCC extraction and utterance-level pooling."""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, fields
from functools import lru_cache

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .corpus import AudioClip, read_wav
from .exceptions import DegenerateFilter, NonFiniteFeature, TooShort


@dataclass(frozen=True)
class MfccConfig:
    pre_emphasis: float = 0.97
    frame_len_ms: float = 25.0
    hop_ms: float = 10.0
    n_mels: int = 26
    n_coeffs: int = 16
    fmin_hz: float = 0.0
    fmax_hz: float | str = "nyquist"
    log_floor: float = 1e-10
    include_c0: bool = True

    def __post_init__(self):
        if not 0.0 <= self.pre_emphasis < 1.0:
            raise ValueError("pre_emphasis must lie in [0, 1)")
        if self.frame_len_ms <= 0 or self.hop_ms <= 0:
            raise ValueError("frame_len_ms and hop_ms must be positive")
        if self.hop_ms > self.frame_len_ms:
            raise ValueError("hop_ms must not exceed frame_len_ms")
        if self.n_mels < 1 or self.n_coeffs < 1:
            raise ValueError("n_mels and n_coeffs must be positive")
        needed = self.n_coeffs if self.include_c0 else self.n_coeffs + 1
        if needed > self.n_mels:
            raise ValueError(f"{self.n_coeffs} coefficients need at least {needed} mel filters")
        if self.fmin_hz < 0:
            raise ValueError("fmin_hz must be nonnegative")
        if self.fmax_hz != "nyquist" and not float(self.fmax_hz) > 0:
            raise ValueError("fmax_hz must be positive or 'nyquist'")
        if self.log_floor <= 0:
            raise ValueError("log_floor must be positive")

    def resolve_fmax(self, sample_rate_hz):
        nyquist = sample_rate_hz / 2.0
        fmax = nyquist if self.fmax_hz == "nyquist" else float(self.fmax_hz)
        if fmax > nyquist:
            raise ValueError(f"fmax_hz {fmax} exceeds Nyquist {nyquist}")
        if not self.fmin_hz < fmax:
            raise ValueError(f"fmin_hz {self.fmin_hz} must be below fmax {fmax}")
        return fmax

    def frame_length(self, sample_rate_hz):
        return int(round(self.frame_len_ms * sample_rate_hz / 1000.0))

    def hop_length(self, sample_rate_hz):
        return int(round(self.hop_ms * sample_rate_hz / 1000.0))

    def n_fft(self, sample_rate_hz):
        return 1 << max(0, (self.frame_length(sample_rate_hz) - 1).bit_length())

    @property
    def n_features(self):
        return 2 * self.n_coeffs

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, data):
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown MFCC config fields: {sorted(unknown)}")
        return cls(**data)

    def fingerprint(self, n_features=None):
        """Short hash identifying this config together with the feature width."""
        payload = {"mfcc": self.to_dict(), "n_features": self.n_features if n_features is None else n_features}
        blob = json.dumps(payload, sort_keys=True, separators=(",", ":")).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


@dataclass(frozen=True)
class MelFilterbank:
    weights: np.ndarray
    center_freqs_hz: np.ndarray
    edge_freqs_hz: np.ndarray


@dataclass(frozen=True)
class MfccMatrix:
    frames: np.ndarray
    frame_times_s: np.ndarray


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def build_mel_filterbank(config, sample_rate_hz, n_fft):
    """Triangular filters on ``n_mels + 2`` mel-equispaced edge points.

    Triangles are un-normalized (peak 1 at the center frequency) and sampled
    at the FFT bin frequencies ``k * sr / n_fft`` for ``k = 0..n_fft/2``.
    """
    if n_fft < 1 or n_fft & (n_fft - 1):
        raise ValueError(f"n_fft must be a power of two, got {n_fft}")
    fmax = config.resolve_fmax(sample_rate_hz)
    mels = np.linspace(hz_to_mel(config.fmin_hz), hz_to_mel(fmax), config.n_mels + 2)
    edges = mel_to_hz(mels)

    edge_bins = np.round(edges * n_fft / sample_rate_hz).astype(int)
    collapsed = np.flatnonzero(np.diff(edge_bins) == 0)
    if collapsed.size:
        i = collapsed[0]
        raise DegenerateFilter(
            f"mel edges {edges[i]:.1f} Hz and {edges[i + 1]:.1f} Hz share FFT bin {edge_bins[i]}; "
            f"n_mels={config.n_mels} is too large for n_fft={n_fft} at {sample_rate_hz} Hz")

    bin_freqs = np.arange(n_fft // 2 + 1) * sample_rate_hz / n_fft
    lower, center, upper = edges[:-2, None], edges[1:-1, None], edges[2:, None]
    rising = (bin_freqs - lower) / (center - lower)
    falling = (upper - bin_freqs) / (upper - center)
    weights = np.maximum(0.0, np.minimum(rising, falling))
    return MelFilterbank(weights=weights, center_freqs_hz=edges[1:-1].copy(), edge_freqs_hz=edges)


@lru_cache(maxsize=32)
def _dct_matrix(n):
    k = np.arange(n)[:, None]
    i = np.arange(n)[None, :]
    mat = np.cos(np.pi * k * (2 * i + 1) / (2 * n)) * np.sqrt(2.0 / n)
    mat[0] /= np.sqrt(2.0)
    mat.setflags(write=False)
    return mat


def dct_ii(v, axis=-1):
    """Orthonormal DCT-II along ``axis``.

    The input is offset by its first element before the transform and the
    offset is added back to the DC term analytically, so a constant input
    yields exactly zero in every coefficient above 0.
    """
    v = np.asarray(v, dtype=np.float64)
    if v.shape[axis] == 0:
        raise ValueError("dct_ii needs a nonempty vector")
    v = np.moveaxis(v, axis, -1)
    n = v.shape[-1]
    base = v[..., :1]
    out = (v - base) @ _dct_matrix(n).T
    out[..., 0] += base[..., 0] * np.sqrt(n)
    return np.moveaxis(out, -1, axis)


def idct_ii(y, axis=-1):
    """Inverse of :func:`dct_ii` (the orthonormal DCT-III)."""
    y = np.moveaxis(np.asarray(y, dtype=np.float64), axis, -1)
    out = y @ _dct_matrix(y.shape[-1])
    return np.moveaxis(out, -1, axis)


def filterbank_energies(clip, config):
    """Per-frame mel filterbank energies, shape ``(T, n_mels)``.

    Shared front half of :func:`extract_mfcc`: pre-emphasis over the whole
    signal, framing with the final partial frame dropped, Hamming window and
    power spectrum ``|X|^2 / n_fft``.
    """
    sr = clip.sample_rate_hz
    frame_len = config.frame_length(sr)
    hop = config.hop_length(sr)
    x = np.asarray(clip.samples, dtype=np.float64)
    if len(x) < frame_len:
        raise TooShort(f"{clip.source_path or 'clip'}: {len(x)} samples is shorter than one "
                       f"{frame_len}-sample frame")
    n_fft = config.n_fft(sr)
    bank = build_mel_filterbank(config, sr, n_fft)

    emphasized = np.empty_like(x)
    emphasized[0] = x[0]
    emphasized[1:] = x[1:] - config.pre_emphasis * x[:-1]

    frames = np.lib.stride_tricks.sliding_window_view(emphasized, frame_len)[::hop]
    spectrum = np.fft.rfft(frames * np.hamming(frame_len), n=n_fft)
    power = (spectrum.real ** 2 + spectrum.imag ** 2) / n_fft
    return power @ bank.weights.T, bank


def extract_mfcc(clip, config=None):
    """Per-frame MFCCs of ``clip`` as an :class:`MfccMatrix`."""
    config = config or MfccConfig()
    energies, _ = filterbank_energies(clip, config)
    log_energy = np.log(np.maximum(energies, config.log_floor))
    cepstra = dct_ii(log_energy, axis=1)
    start = 0 if config.include_c0 else 1
    coeffs = cepstra[:, start:start + config.n_coeffs]
    if not np.all(np.isfinite(coeffs)):
        raise NonFiniteFeature(f"{clip.source_path or 'clip'}: non-finite MFCC values")
    hop_s = config.hop_length(clip.sample_rate_hz) / clip.sample_rate_hz
    times = np.arange(coeffs.shape[0]) * hop_s
    return MfccMatrix(frames=coeffs, frame_times_s=times)


def aggregate(m):
    """Pool an :class:`MfccMatrix` into per-coefficient means then population stds."""
    frames = m.frames if isinstance(m, MfccMatrix) else np.asarray(m, dtype=np.float64)
    if frames.ndim != 2 or frames.shape[0] < 1:
        raise ValueError("aggregate needs at least one frame")
    return np.concatenate([frames.mean(axis=0), frames.std(axis=0)])


def utterance_features(clip, config=None):
    return aggregate(extract_mfcc(clip, config))


class MfccFeaturizer(TransformerMixin, BaseEstimator):
    """Map clips (or WAV paths) to mean+std pooled MFCC vectors.

    Stateless: ``fit`` only records the output width.
    """

    def __init__(self, pre_emphasis=0.97, frame_len_ms=25.0, hop_ms=10.0, n_mels=26,
                 n_coeffs=16, fmin_hz=0.0, fmax_hz="nyquist", log_floor=1e-10, include_c0=True):
        self.pre_emphasis = pre_emphasis
        self.frame_len_ms = frame_len_ms
        self.hop_ms = hop_ms
        self.n_mels = n_mels
        self.n_coeffs = n_coeffs
        self.fmin_hz = fmin_hz
        self.fmax_hz = fmax_hz
        self.log_floor = log_floor
        self.include_c0 = include_c0

    @classmethod
    def from_config(cls, config):
        return cls(**config.to_dict())

    @property
    def config(self):
        return MfccConfig(**self.get_params())

    def fit(self, X=None, y=None):
        self.n_features_out_ = self.config.n_features
        return self

    def transform(self, X):
        config = self.config
        rows = []
        for item in X:
            clip = item if isinstance(item, AudioClip) else read_wav(item)
            rows.append(utterance_features(clip, config))
        return np.asarray(rows, dtype=np.float64).reshape(len(rows), config.n_features)


__all__ = [
    "MfccConfig", "MelFilterbank", "MfccMatrix", "MfccFeaturizer", "hz_to_mel", "mel_to_hz",
    "build_mel_filterbank", "dct_ii", "idct_ii", "filterbank_energies", "extract_mfcc",
    "aggregate", "utterance_features",
]
