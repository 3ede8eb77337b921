"""Multi-resolution STFT distance and synthesis speed measurement."""

from __future__ import annotations

import json
import statistics
import time
from dataclasses import asdict, dataclass

import numpy as np


@dataclass(frozen=True)
class MstftConfig:
    fft_sizes: tuple = (1024, 2048, 512)
    hop_sizes: tuple = (120, 240, 50)
    win_lengths: tuple = (600, 1200, 240)
    eps: float = 1e-8

    def __post_init__(self):
        if not len(self.fft_sizes) == len(self.hop_sizes) == len(self.win_lengths):
            raise ValueError("resolution lists differ in length")
        for n, w in zip(self.fft_sizes, self.win_lengths):
            if w > n:
                raise ValueError(f"window {w} longer than fft {n}")


def _as_array(x) -> np.ndarray:
    if hasattr(x, "samples"):
        x = x.samples
    if hasattr(x, "detach"):
        x = x.detach().cpu().numpy()
    return np.asarray(x, dtype=np.float64)


def stft_magnitude(x: np.ndarray, n_fft: int, hop: int, win: int, eps: float = 1e-8) -> np.ndarray:
    """Centered (reflect-padded) Hann STFT magnitude, shape (..., frames, n_fft // 2 + 1)."""
    pad = n_fft // 2
    if x.shape[-1] <= pad:
        raise ValueError(f"signal of {x.shape[-1]} samples too short for fft size {n_fft}")
    widths = [(0, 0)] * (x.ndim - 1) + [(pad, pad)]
    xp = np.pad(x, widths, mode="reflect")
    n = np.arange(win)
    window = 0.5 - 0.5 * np.cos(2 * np.pi * n / win)
    left = (n_fft - win) // 2
    full = np.zeros(n_fft)
    full[left:left + win] = window
    frames = np.lib.stride_tricks.sliding_window_view(xp, n_fft, axis=-1)[..., ::hop, :]
    spec = np.fft.rfft(frames * full, axis=-1)
    return np.sqrt(np.maximum(spec.real ** 2 + spec.imag ** 2, eps))


def mstft_distance(reference, generated, cfg: MstftConfig | None = None) -> float:
    """Spectral convergence plus log-magnitude L1, averaged over resolutions."""
    cfg = cfg or MstftConfig()
    ref, gen = _as_array(reference), _as_array(generated)
    if ref.shape != gen.shape:
        raise ValueError(f"shape mismatch: {ref.shape} vs {gen.shape}")
    total = 0.0
    for n_fft, hop, win in zip(cfg.fft_sizes, cfg.hop_sizes, cfg.win_lengths):
        y = stft_magnitude(ref, n_fft, hop, win, cfg.eps)
        x = stft_magnitude(gen, n_fft, hop, win, cfg.eps)
        sc = np.linalg.norm(y - x) / np.linalg.norm(y)
        mag = np.mean(np.abs(np.log(y) - np.log(x)))
        total += sc + mag
    return float(total / len(cfg.fft_sizes))


@dataclass(frozen=True)
class SpeedReport:
    realtime_factor: float
    wall_ms_per_clip: float
    reps: int
    audio_seconds: float

    def to_json(self) -> str:
        return json.dumps(asdict(self))


def bench_speed(synth, reps: int = 3, audio_seconds: float | None = None) -> SpeedReport:
    """Median wall time of `synth()` over `reps` runs after one warmup call.

    `synth` returns a Waveform (its duration sets the real-time factor) or
    anything else, in which case `audio_seconds` must be given.
    """
    if reps < 3:
        raise ValueError("reps must be >= 3")
    out = synth()
    if audio_seconds is None:
        if not hasattr(out, "duration"):
            raise ValueError("audio_seconds needed when synth does not return a Waveform")
        audio_seconds = out.duration
    times = []
    for _ in range(reps):
        t0 = time.perf_counter()
        synth()
        times.append(time.perf_counter() - t0)
    med = statistics.median(times)
    return SpeedReport(audio_seconds / med, 1e3 * med, reps, audio_seconds)
