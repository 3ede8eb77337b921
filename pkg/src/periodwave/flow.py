"""Optimal-transport conditional flow matching: path, target, loss and training step."""

from __future__ import annotations

import json
import logging
import time
from dataclasses import dataclass, field

import numpy as np
import torch

from .audio import Waveform, segment as cut_segment
from .estimator import PeriodWaveEstimator
from .spectral import BANDS, FULL_BAND, MelConfig, MelSpec, PriorTrack, energy_prior, mel_spectrogram, prior_to_sample_std
from .wavelet import packet_split

logger = logging.getLogger(__name__)

SIGMA_MIN = 1e-4
NOISE_SCALE = 0.5
TEMPERATURE = 0.667


def _bcast(t, x):
    """Reshape per-item times (B,) to broadcast against (B, ...) states."""
    if isinstance(t, (int, float)):
        return t
    ndim = x.dim() if hasattr(x, "dim") else np.ndim(x)
    t_ndim = t.dim() if hasattr(t, "dim") else np.ndim(t)
    if t_ndim == 0:
        return t
    return t.reshape(t.shape + (1,) * (ndim - t_ndim))


def _check_same(x0, x1):
    if tuple(x0.shape) != tuple(x1.shape):
        raise ValueError(f"shape mismatch: {tuple(x0.shape)} vs {tuple(x1.shape)}")


def ot_path(x0, x1, t, sigma_min: float = SIGMA_MIN):
    """Point at time t on the straight path from prior draw x0 to data x1."""
    _check_same(x0, x1)
    tb = _bcast(t, x0)
    return (1 - (1 - sigma_min) * tb) * x0 + tb * x1


def ot_target(x0, x1, sigma_min: float = SIGMA_MIN):
    """Time-independent velocity of :func:`ot_path`."""
    _check_same(x0, x1)
    return x1 - (1 - sigma_min) * x0


def cfm_loss(v_pred, u_target):
    _check_same(v_pred, u_target)
    if v_pred.numel() == 0:
        raise ValueError("empty input to cfm_loss")
    return torch.mean((v_pred - u_target) ** 2)


@dataclass(frozen=True)
class FlowSample:
    x0: torch.Tensor
    x1: torch.Tensor
    t: torch.Tensor
    x_t: torch.Tensor
    u_target: torch.Tensor


def make_flow_sample(x0, x1, t, sigma_min: float = SIGMA_MIN) -> FlowSample:
    return FlowSample(x0, x1, t, ot_path(x0, x1, t, sigma_min), ot_target(x0, x1, sigma_min))


@dataclass(frozen=True)
class PriorSpec:
    """Diagonal Gaussian prior: std = temperature * noise_scale * sample_std."""

    sample_std: object
    noise_scale: float = NOISE_SCALE
    temperature: float = TEMPERATURE

    def __post_init__(self):
        if self.noise_scale <= 0:
            raise ValueError("noise_scale must be positive")
        if self.temperature < 0:
            raise ValueError("temperature must be non-negative")


def sample_prior(spec: PriorSpec, length: int, rng: torch.Generator | None = None,
                 dtype=torch.float32) -> torch.Tensor:
    std = torch.as_tensor(spec.sample_std, dtype=dtype)
    if std.shape[-1] != length:
        raise ValueError(f"prior std covers {std.shape[-1]} samples, requested {length}")
    eps = torch.randn(std.shape, generator=rng, dtype=dtype)
    return (spec.temperature * spec.noise_scale) * std * eps


# -- training ---------------------------------------------------------------


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 5e-4
    batch_size: int = 128
    segment: int = 32768
    optimizer: str = "adamw"
    sigma_min: float = SIGMA_MIN
    max_steps: int = 1_000_000
    betas: tuple = (0.9, 0.999)
    weight_decay: float = 0.01
    grad_clip: float = 1000.0
    noise_scale: float = NOISE_SCALE

    def __post_init__(self):
        if self.lr <= 0:
            raise ValueError("lr must be positive")
        if self.segment % 256:
            raise ValueError("segment must be a multiple of the 256-sample hop")
        if self.optimizer != "adamw":
            raise ValueError(f"unsupported optimizer {self.optimizer!r}")


MULTIBAND_LR = 2e-4


@dataclass
class TrainState:
    model: PeriodWaveEstimator
    optimizer: torch.optim.Optimizer
    step: int = 0


def make_train_state(model: PeriodWaveEstimator, cfg: TrainConfig) -> TrainState:
    opt = torch.optim.AdamW(
        model.parameters(), lr=cfg.lr, betas=tuple(cfg.betas), weight_decay=cfg.weight_decay
    )
    return TrainState(model, opt, 0)


@dataclass(frozen=True)
class TrainItem:
    segment: Waveform
    mel: MelSpec
    prior: PriorTrack


def make_item(w: Waveform, mel_cfg: MelConfig | None = None, band: int | None = None) -> TrainItem:
    """Mel and the matching (full-band or band-wise) prior for one training segment."""
    mel = mel_spectrogram(w, mel_cfg)
    spec = FULL_BAND if band is None else BANDS[band]
    prior = energy_prior(mel, spec["bins"], spec["energy_min"], spec["energy_max"],
                         band_id=0 if band is None else band)
    return TrainItem(w, mel, prior)


def random_items(waves: list[Waveform], n: int, length: int, rng: np.random.Generator,
                 mel_cfg: MelConfig | None = None, band: int | None = None) -> list[TrainItem]:
    """Draw `n` random fixed-length segments (zero-padded when a clip is short)."""
    items = []
    for _ in range(n):
        w = waves[rng.integers(len(waves))]
        start = int(rng.integers(max(len(w) - length, 0) + 1))
        items.append(make_item(cut_segment(w, start, length), mel_cfg, band))
    return items


def _collate(model: PeriodWaveEstimator, batch: list[TrainItem], dtype):
    cfg = model.cfg
    x1 = torch.as_tensor(np.stack([it.segment.samples for it in batch]), dtype=dtype)
    mel = torch.as_tensor(np.stack([it.mel.values for it in batch]), dtype=dtype)
    frames = mel.shape[1]
    if x1.shape[1] != frames * cfg.hop_size:
        raise ValueError(f"segment of {x1.shape[1]} samples does not match {frames} mel frames")
    lower = None
    hop = cfg.hop_size
    if cfg.multiband:
        bands = packet_split(x1)
        x1 = bands[cfg.band]
        if cfg.band:
            lower = torch.stack(list(bands.bands[: cfg.band]), dim=1)
        hop //= cfg.signal_stride
    std = np.stack([prior_to_sample_std(it.prior, hop, x1.shape[1]) for it in batch])
    return x1, mel, torch.as_tensor(std, dtype=dtype), lower


def train_step(state: TrainState, batch: list[TrainItem], cfg: TrainConfig,
               rng: torch.Generator) -> tuple[TrainState, float]:
    """One AdamW update on the OT-CFM loss; `state` is updated in place and returned."""
    model = state.model
    model.train()
    dtype = model.dtype
    x1, mel, std, lower = _collate(model, batch, dtype)
    B, L = x1.shape
    t = torch.rand(B, generator=rng, dtype=dtype)
    x0 = sample_prior(PriorSpec(std, cfg.noise_scale, 1.0), L, rng, dtype=dtype)
    sample = make_flow_sample(x0, x1, t, cfg.sigma_min)
    seed = int(torch.randint(0, 2**62, (1,), generator=rng))
    with torch.random.fork_rng(devices=[]):
        torch.manual_seed(seed)
        cond = model.encode(mel)
        v = model(sample.x_t, t, cond, lower=lower)
    loss = cfm_loss(v, sample.u_target)
    if not torch.isfinite(loss):
        raise FloatingPointError(
            f"non-finite loss at step {state.step}: t={t.tolist()}, "
            f"|x_t|max={sample.x_t.abs().max().item():.3g}, |v|max={v.abs().max().item():.3g}"
        )
    state.optimizer.zero_grad(set_to_none=True)
    loss.backward()
    torch.nn.utils.clip_grad_norm_(model.parameters(), cfg.grad_clip)
    state.optimizer.step()
    state.step += 1
    return state, float(loss.detach())


@dataclass
class TrainLog:
    """Newline-delimited JSON records of {step, loss, lr, wall_ms}."""

    path: object = None
    records: list = field(default_factory=list)

    def write(self, step: int, loss: float, lr: float, wall_ms: float):
        rec = {"step": step, "loss": loss, "lr": lr, "wall_ms": wall_ms}
        self.records.append(rec)
        if self.path is not None:
            with open(self.path, "a") as f:
                f.write(json.dumps(rec) + "\n")


def train(state: TrainState, waves: list[Waveform], cfg: TrainConfig, steps: int, seed: int = 0,
          mel_cfg: MelConfig | None = None, log: TrainLog | None = None,
          on_checkpoint=None, checkpoint_every: int = 0) -> list[float]:
    """Run `steps` updates on random segments of `waves`; returns the per-step losses."""
    band = state.model.cfg.band
    data_rng = np.random.default_rng(seed)
    gen = torch.Generator().manual_seed(seed)
    losses = []
    for _ in range(steps):
        batch = random_items(waves, cfg.batch_size, cfg.segment, data_rng, mel_cfg, band)
        t0 = time.perf_counter()
        state, loss = train_step(state, batch, cfg, gen)
        wall_ms = 1e3 * (time.perf_counter() - t0)
        losses.append(loss)
        if log is not None:
            log.write(state.step, loss, state.optimizer.param_groups[0]["lr"], wall_ms)
        if on_checkpoint is not None and checkpoint_every and state.step % checkpoint_every == 0:
            on_checkpoint(state)
        if state.step % 100 == 0:
            logger.info("step %d loss %.5f", state.step, loss)
    return losses
