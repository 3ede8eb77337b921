"""Log-mel frontend and energy-based data-dependent priors."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .audio import Waveform


@dataclass(frozen=True)
class MelConfig:
    fft_size: int = 1024
    hop_size: int = 256
    win_size: int = 1024
    n_mels: int = 100
    fmin: float = 0.0
    fmax: float = 12000.0
    sample_rate: int = 24000
    log_floor: float = 1e-5

    def __post_init__(self):
        if not self.win_size <= self.fft_size:
            raise ValueError("win_size must not exceed fft_size")
        if not 0 < self.hop_size <= self.win_size:
            raise ValueError("hop_size must be in (0, win_size]")
        if not 0 <= self.fmin < self.fmax <= self.sample_rate / 2:
            raise ValueError("need 0 <= fmin < fmax <= sample_rate / 2")
        if self.log_floor <= 0:
            raise ValueError("log_floor must be positive")


# (lo, hi) mel-bin ranges and dataset energy (min, max) for the 100-bin 24 kHz setup.
FULL_BAND = {"bins": (0, 100), "energy_min": 0.031622782, "energy_max": 9.124346}
BANDS = (
    {"bins": (0, 61), "energy_min": 0.024698181, "energy_max": 8.756637},
    {"bins": (60, 81), "energy_min": 0.014491379, "energy_max": 4.242267},
    {"bins": (80, 93), "energy_min": 0.011401756, "energy_max": 3.1011465},
    {"bins": (91, 100), "energy_min": 0.031622782, "energy_max": 2.3407087},
)
STD_FLOOR = 0.1


@dataclass(frozen=True)
class MelSpec:
    """Frame-major log-mel matrix of shape (frames, n_mels)."""

    values: np.ndarray
    config: MelConfig = field(default_factory=MelConfig)

    @property
    def frames(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class PriorTrack:
    frame_std: np.ndarray
    band_id: int = 0
    energy_min: float = FULL_BAND["energy_min"]
    energy_max: float = FULL_BAND["energy_max"]

    @property
    def frames(self) -> int:
        return self.frame_std.shape[0]


def hz_to_mel(f):
    """Slaney-style mel scale: linear below 1 kHz, logarithmic above."""
    f = np.asarray(f, dtype=np.float64)
    f_sp = 200.0 / 3
    min_log_hz = 1000.0
    min_log_mel = min_log_hz / f_sp
    logstep = math.log(6.4) / 27.0
    mel = f / f_sp
    hi = f >= min_log_hz
    mel = np.where(hi, min_log_mel + np.log(np.maximum(f, 1e-12) / min_log_hz) / logstep, mel)
    return mel


def mel_to_hz(m):
    m = np.asarray(m, dtype=np.float64)
    f_sp = 200.0 / 3
    min_log_hz = 1000.0
    min_log_mel = min_log_hz / f_sp
    logstep = math.log(6.4) / 27.0
    return np.where(m >= min_log_mel, min_log_hz * np.exp(logstep * (m - min_log_mel)), f_sp * m)


def mel_filterbank(cfg: MelConfig) -> np.ndarray:
    """Triangular area-normalized filterbank, shape (n_mels, fft_size // 2 + 1)."""
    n_freqs = cfg.fft_size // 2 + 1
    fft_freqs = np.linspace(0.0, cfg.sample_rate / 2, n_freqs)
    edges = mel_to_hz(np.linspace(hz_to_mel(cfg.fmin), hz_to_mel(cfg.fmax), cfg.n_mels + 2))
    widths = np.diff(edges)
    ramps = edges[:, None] - fft_freqs[None, :]
    lower = -ramps[:-2] / widths[:-1, None]
    upper = ramps[2:] / widths[1:, None]
    weights = np.maximum(0.0, np.minimum(lower, upper))
    weights *= (2.0 / (edges[2:] - edges[:-2]))[:, None]
    return weights


def _window(cfg: MelConfig) -> np.ndarray:
    # periodic Hann, zero-padded to fft_size and centered
    n = np.arange(cfg.win_size)
    win = 0.5 - 0.5 * np.cos(2 * np.pi * n / cfg.win_size)
    left = (cfg.fft_size - cfg.win_size) // 2
    out = np.zeros(cfg.fft_size)
    out[left:left + cfg.win_size] = win
    return out


def num_frames(n_samples: int, hop_size: int) -> int:
    return -(-n_samples // hop_size)


def magnitude_frames(x: np.ndarray, cfg: MelConfig) -> np.ndarray:
    """Linear STFT magnitudes, shape (frames, fft_size // 2 + 1)."""
    T = x.shape[0]
    frames = num_frames(T, cfg.hop_size)
    side = (cfg.fft_size - cfg.hop_size) // 2
    extra = frames * cfg.hop_size - T
    padded = np.pad(x, (side, side + extra), mode="reflect")
    stack = np.lib.stride_tricks.sliding_window_view(padded, cfg.fft_size)[:: cfg.hop_size]
    stack = stack[:frames]
    return np.abs(np.fft.rfft(stack * _window(cfg), axis=-1))


def mel_spectrogram(w: Waveform, cfg: MelConfig | None = None) -> MelSpec:
    """Natural-log mel spectrogram with ceil(T / hop) frames.

    The signal is reflect-padded by (fft - hop) / 2 on both sides plus enough on
    the right to complete the last hop, so frame k is centered on samples
    [k * hop, (k + 1) * hop).
    """
    cfg = cfg or MelConfig()
    if w.sample_rate != cfg.sample_rate:
        raise ValueError(f"sample rate {w.sample_rate} != mel config rate {cfg.sample_rate}")
    if len(w) < cfg.win_size:
        raise ValueError(f"signal of {len(w)} samples is shorter than one window ({cfg.win_size})")
    mag = magnitude_frames(np.asarray(w.samples, dtype=np.float64), cfg)
    mel = mag @ mel_filterbank(cfg).T
    return MelSpec(np.log(np.maximum(mel, cfg.log_floor)), cfg)


def frame_energy(mel: MelSpec, band_bins: tuple[int, int]) -> np.ndarray:
    lo, hi = band_bins
    if not 0 <= lo < hi <= mel.values.shape[1]:
        raise ValueError(f"invalid band bins {band_bins} for {mel.values.shape[1]} mel bins")
    return np.exp(mel.values[:, lo:hi]).mean(axis=1)


def energy_prior(
    mel: MelSpec,
    band_bins: tuple[int, int] = FULL_BAND["bins"],
    e_min: float = FULL_BAND["energy_min"],
    e_max: float = FULL_BAND["energy_max"],
    std_floor: float = STD_FLOOR,
    band_id: int = 0,
) -> PriorTrack:
    """Per-frame prior std from mean linear mel energy in ``[lo, hi)``."""
    if e_max <= e_min:
        raise ValueError(f"energy max {e_max} must exceed energy min {e_min}")
    energy = frame_energy(mel, band_bins)
    std = np.clip((energy - e_min) / (e_max - e_min), std_floor, 1.0)
    return PriorTrack(std, band_id=band_id, energy_min=e_min, energy_max=e_max)


def band_priors(mel: MelSpec, std_floor: float = STD_FLOOR) -> list[PriorTrack]:
    """Priors for the four wavelet bands using the built-in bin ranges."""
    return [
        energy_prior(mel, b["bins"], b["energy_min"], b["energy_max"], std_floor, band_id=k)
        for k, b in enumerate(BANDS)
    ]


def prior_to_sample_std(p: PriorTrack, hop: int, target_len: int) -> np.ndarray:
    if p.frames == 0:
        raise ValueError("empty prior track")
    if target_len > p.frames * hop:
        raise ValueError(f"target length {target_len} exceeds {p.frames} frames x hop {hop}")
    return np.repeat(p.frame_std, hop)[:target_len]


def save_mel(mel: MelSpec, path) -> None:
    """Write ``<path>`` as raw little-endian float32 plus a ``<path>.json`` sidecar."""
    path = Path(path)
    mel.values.astype("<f4").tofile(path)
    meta = {"frames": mel.frames, "n_mels": mel.values.shape[1], "config": asdict(mel.config)}
    path.with_name(path.name + ".json").write_text(json.dumps(meta, indent=2))


def load_mel(path) -> MelSpec:
    path = Path(path)
    meta = json.loads(path.with_name(path.name + ".json").read_text())
    values = np.fromfile(path, dtype="<f4")
    expected = meta["frames"] * meta["n_mels"]
    if values.size != expected:
        raise ValueError(f"{path}: {values.size} floats, sidecar declares {expected}")
    cfg = MelConfig(**meta["config"])
    return MelSpec(values.reshape(meta["frames"], meta["n_mels"]).astype(np.float64), cfg)
