"""Audio input, labeled manifests, and a deterministic synthetic corpus.

WAV files are parsed directly from the RIFF container because the standard
library ``wave`` module does not decode IEEE float data.
"""

from __future__ import annotations

import csv
import io
import os
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .exceptions import (
    DuplicatePath,
    EmptyAudio,
    IoFailure,
    MalformedWav,
    MissingFile,
    MissingHeader,
    UnknownLabel,
    UnsupportedEncoding,
)

#: Canonical emotion vocabulary, in the order used for every 7-class table.
EMOTIONS = ("angry", "disgust", "fear", "happy", "neutral", "sad", "surprise")

MANIFEST_HEADER = ("path", "label", "speaker")

_FORMAT_PCM = 0x0001
_FORMAT_FLOAT = 0x0003
_FORMAT_EXTENSIBLE = 0xFFFE


def parse_label(text):
    """Return the canonical lowercase emotion for ``text`` (case-insensitive)."""
    label = str(text).strip().lower()
    if label not in EMOTIONS:
        raise UnknownLabel(f"unknown emotion label {text!r}; expected one of {', '.join(EMOTIONS)}")
    return label


@dataclass(frozen=True)
class AudioClip:
    samples: np.ndarray
    sample_rate_hz: int
    source_path: str = ""

    @property
    def duration_s(self):
        return len(self.samples) / self.sample_rate_hz


@dataclass(frozen=True)
class LabeledUtterance:
    clip_path: str
    label: str
    speaker_id: str


# ---------------------------------------------------------------------------
# WAV I/O


def _iter_chunks(data):
    pos = 12
    while pos + 8 <= len(data):
        chunk_id = data[pos:pos + 4]
        (size,) = struct.unpack_from("<I", data, pos + 4)
        body = data[pos + 8:pos + 8 + size]
        if len(body) < size:
            raise MalformedWav(f"chunk {chunk_id!r} declares {size} bytes but only {len(body)} remain")
        yield chunk_id, body
        pos += 8 + size + (size & 1)


def read_wav(path):
    """Read a PCM16 or float32 RIFF/WAVE file as a mono :class:`AudioClip`.

    Stereo input is averaged to mono. Integer samples are divided by 32768.
    """
    path = os.fspath(path)
    try:
        with open(path, "rb") as fh:
            data = fh.read()
    except FileNotFoundError:
        raise MissingFile(f"no such file: {path}") from None
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc

    if len(data) < 12 or data[:4] != b"RIFF" or data[8:12] != b"WAVE":
        raise MalformedWav(f"{path}: not a RIFF/WAVE file")
    (riff_size,) = struct.unpack_from("<I", data, 4)
    if riff_size + 8 > len(data):
        raise MalformedWav(f"{path}: RIFF size {riff_size} exceeds file length {len(data)}")

    fmt = None
    pcm = None
    try:
        for chunk_id, body in _iter_chunks(data[:riff_size + 8]):
            if chunk_id == b"fmt ":
                if len(body) < 16:
                    raise MalformedWav(f"{path}: fmt chunk too short")
                fmt = struct.unpack_from("<HHIIHH", body, 0)
                if fmt[0] == _FORMAT_EXTENSIBLE:
                    if len(body) < 40:
                        raise MalformedWav(f"{path}: truncated WAVE_FORMAT_EXTENSIBLE header")
                    (sub,) = struct.unpack_from("<H", body, 24)
                    fmt = (sub,) + fmt[1:]
            elif chunk_id == b"data":
                pcm = body
    except MalformedWav as exc:
        raise MalformedWav(f"{path}: {exc}") from None
    if fmt is None or pcm is None:
        raise MalformedWav(f"{path}: missing fmt or data chunk")

    tag, channels, rate, _byte_rate, block_align, bits = fmt
    if channels not in (1, 2):
        raise UnsupportedEncoding(f"{path}: {channels} channels (only mono/stereo supported)")
    if tag == _FORMAT_PCM and bits == 16:
        dtype, scale = "<i2", 32768.0
    elif tag == _FORMAT_FLOAT and bits == 32:
        dtype, scale = "<f4", 1.0
    else:
        raise UnsupportedEncoding(f"{path}: format tag {tag:#06x} with {bits} bits per sample")
    if block_align != channels * bits // 8:
        raise MalformedWav(f"{path}: block align {block_align} inconsistent with {channels}x{bits} bits")

    n_frames = len(pcm) // block_align
    if n_frames == 0:
        raise EmptyAudio(f"{path}: no samples")
    raw = np.frombuffer(pcm[:n_frames * block_align], dtype=dtype).astype(np.float64) / scale
    samples = raw.reshape(n_frames, channels).mean(axis=1)
    if not np.all(np.isfinite(samples)):
        raise MalformedWav(f"{path}: non-finite sample values")
    samples = np.clip(samples, -1.0, 1.0)
    return AudioClip(samples=samples, sample_rate_hz=int(rate), source_path=path)


def encode_wav(samples, sample_rate_hz, encoding="pcm16"):
    """Return the bytes of a RIFF/WAVE file.

    ``samples`` is either a 1-D mono buffer or an ``(n, channels)`` array with
    values in [-1, 1].
    """
    arr = np.asarray(samples, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[:, None]
    channels = arr.shape[1]
    if encoding == "pcm16":
        tag, bits = _FORMAT_PCM, 16
        # asymmetric int16 range: -1.0 maps to -32768
        ints = np.clip(np.round(arr * 32768.0), -32768, 32767).astype("<i2")
        payload = ints.tobytes()
    elif encoding == "float32":
        tag, bits = _FORMAT_FLOAT, 32
        payload = arr.astype("<f4").tobytes()
    else:
        raise ValueError(f"unknown encoding {encoding!r}")
    block_align = channels * bits // 8
    fmt = struct.pack("<HHIIHH", tag, channels, int(sample_rate_hz),
                      int(sample_rate_hz) * block_align, block_align, bits)
    body = b"WAVE" + b"fmt " + struct.pack("<I", len(fmt)) + fmt
    body += b"data" + struct.pack("<I", len(payload)) + payload
    if len(payload) & 1:
        body += b"\x00"
    return b"RIFF" + struct.pack("<I", len(body)) + body


def write_wav(path, samples, sample_rate_hz, encoding="pcm16"):
    try:
        with open(path, "wb") as fh:
            fh.write(encode_wav(samples, sample_rate_hz, encoding))
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


# ---------------------------------------------------------------------------
# Manifests


def load_manifest(path):
    """Parse a ``path,label,speaker`` CSV manifest.

    Clip paths are resolved relative to the manifest's directory; row order is
    preserved.
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise MissingFile(f"no such manifest: {path}") from None
    except OSError as exc:
        raise IoFailure(f"cannot read manifest {path}: {exc}") from exc

    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header is None or tuple(h.strip().lower() for h in header) != MANIFEST_HEADER:
        raise MissingHeader(f"{path}: first line must be {','.join(MANIFEST_HEADER)!r}")

    base = path.parent
    seen = set()
    records = []
    for row_index, row in enumerate(reader, start=1):
        if not row or all(not cell.strip() for cell in row):
            continue
        if len(row) != 3:
            raise MissingHeader(f"{path}: row {row_index} has {len(row)} fields, expected 3")
        rel, label, speaker = (cell.strip() for cell in row)
        try:
            label = parse_label(label)
        except UnknownLabel as exc:
            raise UnknownLabel(f"{path}: row {row_index}: {exc}") from None
        clip_path = os.path.normpath(base / rel)
        if clip_path in seen:
            raise DuplicatePath(f"{path}: row {row_index}: duplicate path {rel!r}")
        seen.add(clip_path)
        records.append(LabeledUtterance(clip_path=clip_path, label=label, speaker_id=speaker))
    return records


def write_manifest(path, rows):
    """Write ``(relative_path, label, speaker)`` rows with LF line endings."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(MANIFEST_HEADER)
    writer.writerows(rows)
    try:
        Path(path).write_text(buf.getvalue(), encoding="utf-8", newline="")
    except OSError as exc:
        raise IoFailure(f"cannot write manifest {path}: {exc}") from exc


# ---------------------------------------------------------------------------
# Synthetic corpus


@dataclass(frozen=True)
class VoiceParams:
    """Signal recipe for one synthetic class."""

    f0_hz: float
    n_harmonics: int
    am_rate_hz: float
    snr_db: float


def _default_voices():
    # Neighbouring classes overlap under jitter, so the default corpus is not trivially separable.
    return {
        "angry": VoiceParams(200.0, 8, 6.0, 12.0),
        "disgust": VoiceParams(160.0, 7, 4.0, 10.0),
        "fear": VoiceParams(240.0, 6, 7.0, 10.0),
        "happy": VoiceParams(220.0, 8, 5.0, 12.0),
        "neutral": VoiceParams(140.0, 8, 4.0, 14.0),
        "sad": VoiceParams(125.0, 6, 3.0, 10.0),
        "surprise": VoiceParams(260.0, 7, 6.0, 12.0),
    }


@dataclass(frozen=True)
class SynthSpec:
    voices: dict = field(default_factory=_default_voices)
    utterances_per_class: int = 100
    duration_s: float = 1.0
    sample_rate_hz: int = 16000
    seed: int = 20170101
    n_speakers: int = 4
    jitter: float = 0.06
    peak: float = 0.8

    def __post_init__(self):
        if self.utterances_per_class < 1:
            raise ValueError("utterances_per_class must be positive")
        if not 0.5 <= self.duration_s <= 8.0:
            raise ValueError("duration_s must lie in [0.5, 8]")
        if not 8000 <= self.sample_rate_hz <= 48000:
            raise ValueError("sample_rate_hz must lie in [8000, 48000]")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        unknown = set(self.voices) - set(EMOTIONS)
        if unknown:
            raise UnknownLabel(f"unknown class names in synth spec: {sorted(unknown)}")
        params = list(self.voices.values())
        if len(set(params)) != len(params):
            raise ValueError("class signal parameters must be pairwise distinct")
        nyquist = self.sample_rate_hz / 2
        for name, v in self.voices.items():
            top = v.f0_hz * v.n_harmonics * (1 + self.jitter)
            if top >= nyquist or v.am_rate_hz >= nyquist:
                raise ValueError(f"class {name!r}: frequencies must stay below {nyquist} Hz")

    def classes(self):
        return [e for e in EMOTIONS if e in self.voices]

    def to_dict(self):
        return {
            "voices": {k: vars(v).copy() for k, v in sorted(self.voices.items())},
            "utterances_per_class": self.utterances_per_class,
            "duration_s": self.duration_s,
            "sample_rate_hz": self.sample_rate_hz,
            "seed": self.seed,
            "n_speakers": self.n_speakers,
            "jitter": self.jitter,
            "peak": self.peak,
        }


def synthesize_utterance(voice, spec, rng):
    """Render one utterance: harmonic stack under an AM envelope plus noise."""
    n = int(round(spec.duration_s * spec.sample_rate_hz))
    t = np.arange(n) / spec.sample_rate_hz
    f0 = voice.f0_hz * (1.0 + rng.uniform(-spec.jitter, spec.jitter))
    am = voice.am_rate_hz * (1.0 + rng.uniform(-spec.jitter, spec.jitter))
    phases = rng.uniform(0.0, 2 * np.pi, size=voice.n_harmonics)

    k = np.arange(1, voice.n_harmonics + 1)
    tone = (np.sin(2 * np.pi * f0 * np.outer(t, k) + phases) / k).sum(axis=1)
    envelope = 0.6 + 0.4 * np.sin(2 * np.pi * am * t + rng.uniform(0.0, 2 * np.pi))
    signal = tone * envelope

    noise_power = np.mean(signal ** 2) / 10 ** (voice.snr_db / 10)
    signal = signal + rng.normal(0.0, np.sqrt(noise_power), size=n)
    return spec.peak * signal / np.max(np.abs(signal))


def iter_synthetic_corpus(spec):
    """Yield ``(file_name, label, speaker, samples)`` for every utterance.

    Each utterance draws from its own generator seeded by
    ``(seed, class index, utterance index)``, so output does not depend on
    iteration order.
    """
    for label in spec.classes():
        class_index = EMOTIONS.index(label)
        for i in range(spec.utterances_per_class):
            rng = np.random.default_rng([spec.seed, class_index, i])
            samples = synthesize_utterance(spec.voices[label], spec, rng)
            speaker = f"spk{i % spec.n_speakers + 1}"
            yield f"{label}_{i:04d}.wav", label, speaker, samples


def generate_synthetic_corpus(spec, out_dir):
    """Write the synthetic corpus as PCM16 WAV files plus ``manifest.csv``.

    Returns the manifest path.
    """
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise IoFailure(f"cannot create {out}: {exc}") from exc
    rows = []
    for name, label, speaker, samples in iter_synthetic_corpus(spec):
        write_wav(out / name, samples, spec.sample_rate_hz)
        rows.append((name, label, speaker))
    manifest = out / "manifest.csv"
    write_manifest(manifest, rows)
    return str(manifest)
