"""WAV input/output and training segment extraction."""

from __future__ import annotations

import os
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.io import wavfile

ENCODINGS = ("pcm16", "float32")


@dataclass(frozen=True)
class Waveform:
    """Mono float waveform.

    Args:
        samples (ndarray): 1-D float array, nominally within [-1, 1].
        sample_rate (int): Sampling rate in Hz.
    """

    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        samples = np.asarray(self.samples)
        if samples.ndim != 1:
            raise ValueError(f"waveform must be 1-D, got shape {samples.shape}")
        if int(self.sample_rate) <= 0:
            raise ValueError(f"sample_rate must be positive, got {self.sample_rate}")
        if not np.all(np.isfinite(samples)):
            raise ValueError("waveform contains NaN or Inf")
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "sample_rate", int(self.sample_rate))

    def __len__(self):
        return self.samples.shape[0]

    @property
    def duration(self) -> float:
        return len(self) / self.sample_rate


def load_wav(path) -> Waveform:
    """Read a mono 16-bit PCM or 32-bit float WAV file."""
    if not os.path.isfile(path):
        raise FileNotFoundError(f"no such wav file: {path}")
    try:
        sr, data = wavfile.read(path)
    except ValueError as e:
        raise ValueError(f"cannot decode {path}: {e}") from e
    if data.ndim != 1:
        raise ValueError(
            f"{path}: only mono files are supported, found {data.shape[1]} channels"
        )
    if data.dtype == np.int16:
        samples = data.astype(np.float64) / 32768.0
    elif data.dtype == np.float32:
        samples = data.astype(np.float64)
    else:
        raise ValueError(
            f"{path}: unsupported sample encoding {data.dtype}; "
            "expected 16-bit PCM or 32-bit float"
        )
    return Waveform(samples, sr)


def save_wav(w: Waveform, path, encoding: str = "float32") -> None:
    """Write `w` as a mono WAV file.

    Samples outside [-1, 1] saturate at the encoding limits with a warning.
    Float encoding is lossless for float32-representable input.
    """
    if encoding not in ENCODINGS:
        raise ValueError(f"encoding must be one of {ENCODINGS}, got {encoding!r}")
    x = np.asarray(w.samples, dtype=np.float64)
    n_clip = int(np.count_nonzero(np.abs(x) > 1.0))
    if n_clip:
        warnings.warn(f"{n_clip} samples outside [-1, 1] saturated on save to {path}")
        x = np.clip(x, -1.0, 1.0)
    if encoding == "pcm16":
        data = np.clip(np.round(x * 32768.0), -32768, 32767).astype(np.int16)
    else:
        data = x.astype(np.float32)
    wavfile.write(path, w.sample_rate, data)


def segment(w: Waveform, start: int, length: int) -> Waveform:
    """Cut `length` samples from `start`, zero-padding past the end of `w`."""
    if start < 0:
        raise ValueError(f"start must be non-negative, got {start}")
    if length <= 0:
        raise ValueError(f"length must be positive, got {length}")
    out = np.zeros(length, dtype=w.samples.dtype)
    chunk = w.samples[start:start + length]
    out[: chunk.shape[0]] = chunk
    return Waveform(out, w.sample_rate)
