"""Fixed-grid ODE integration and waveform synthesis from a trained estimator."""

from __future__ import annotations

import csv
import time
import warnings
from dataclasses import dataclass, field, replace

import numpy as np
import torch

from .audio import Waveform
from .estimator import FreeUParams, PeriodWaveEstimator
from .flow import NOISE_SCALE, TEMPERATURE, PriorSpec, sample_prior
from .metrics import MstftConfig, mstft_distance
from .spectral import MelSpec, PriorTrack, prior_to_sample_std
from .wavelet import N_BANDS, BandComponents, packet_merge

METHODS = ("euler", "midpoint", "rk4")


@dataclass(frozen=True)
class SamplerConfig:
    method: str = "midpoint"
    steps: int = 16
    temperature: float = TEMPERATURE
    freeu: FreeUParams = field(default_factory=FreeUParams)
    per_band_steps: tuple | None = None
    band_temperatures: tuple | None = None
    noise_scale: float = NOISE_SCALE

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown ODE method {self.method!r}; choose from {METHODS}")
        if self.steps < 1:
            raise ValueError("steps must be >= 1")
        if self.temperature < 0:
            raise ValueError("temperature must be non-negative")
        if self.per_band_steps is not None:
            if len(self.per_band_steps) != N_BANDS or min(self.per_band_steps) < 1:
                raise ValueError(f"per_band_steps needs {N_BANDS} positive entries")
        if self.band_temperatures is not None and len(self.band_temperatures) != N_BANDS:
            raise ValueError(f"band_temperatures needs {N_BANDS} entries")


def integrate(field_fn, x0, cfg: SamplerConfig):
    """Integrate dx/dt = field_fn(t, x) from t=0 to t=1 on a uniform grid.

    `x0` may be a numpy array or a tensor; the result has the same type.
    """
    if cfg.method == "rk4":
        warnings.warn("rk4 costs four field evaluations per step", stacklevel=2)
    x = x0
    h = 1.0 / cfg.steps
    for i in range(cfg.steps):
        t = i * h
        if cfg.method == "euler":
            x = x + h * field_fn(t, x)
        elif cfg.method == "midpoint":
            k1 = field_fn(t, x)
            x = x + h * field_fn(t + h / 2, x + (h / 2) * k1)
        else:
            k1 = field_fn(t, x)
            k2 = field_fn(t + h / 2, x + (h / 2) * k1)
            k3 = field_fn(t + h / 2, x + (h / 2) * k2)
            k4 = field_fn(t + h, x + h * k3)
            x = x + (h / 6) * (k1 + 2 * k2 + 2 * k3 + k4)
        finite = torch.isfinite(x).all() if isinstance(x, torch.Tensor) else np.isfinite(x).all()
        if not finite:
            raise FloatingPointError(f"ODE state became non-finite at step {i + 1}/{cfg.steps}")
    return x


def _generator(rng) -> torch.Generator:
    if isinstance(rng, torch.Generator):
        return rng
    return torch.Generator().manual_seed(0 if rng is None else int(rng))


def _device(e: PeriodWaveEstimator):
    return e.out_proj.weight.device


def _mel_tensor(e: PeriodWaveEstimator, mel: MelSpec):
    if mel.values.shape[1] != e.cfg.mel_encoder.n_mels:
        raise ValueError("mel bins do not match the estimator")
    return torch.as_tensor(mel.values, dtype=e.dtype, device=_device(e))[None]


def _check_prior(prior: PriorTrack, mel: MelSpec):
    if len(prior.frame_std) != mel.values.shape[0]:
        raise ValueError(f"prior has {len(prior.frame_std)} frames, mel has {mel.values.shape[0]}")


@torch.no_grad()
def synthesize(e: PeriodWaveEstimator, mel: MelSpec, prior: PriorTrack, cfg: SamplerConfig,
               rng=None, length: int | None = None, x0: torch.Tensor | None = None) -> Waveform:
    """Render a waveform of `length` samples (default frames * hop) from a mel."""
    if e.cfg.multiband:
        raise ValueError("use synthesize_mb for band estimators")
    _check_prior(prior, mel)
    e.eval()
    frames = mel.values.shape[0]
    hop = e.cfg.hop_size
    total = frames * hop
    length = total if length is None else length
    if not (frames - 1) * hop < length <= total:
        raise ValueError(f"length {length} inconsistent with {frames} mel frames")
    if x0 is None:
        std = prior_to_sample_std(prior, hop, total)[None]
        x0 = sample_prior(PriorSpec(std, cfg.noise_scale, cfg.temperature), total,
                          _generator(rng), dtype=e.dtype)
    cond = e.encode(_mel_tensor(e, mel))
    x = integrate(lambda t, x: e(x, t, cond, freeu=cfg.freeu), x0.to(_device(e)), cfg)
    return Waveform(x[0, :length].cpu().double().numpy(), mel.config.sample_rate)


@torch.no_grad()
def synthesize_mb(estimators, mel: MelSpec, priors, cfg: SamplerConfig, rng=None,
                  length: int | None = None) -> Waveform:
    """Render the four wavelet bands in order, each conditioned on the ones below it."""
    if len(estimators) != N_BANDS or len(priors) != N_BANDS:
        raise ValueError(f"need {N_BANDS} band estimators and priors")
    steps = cfg.per_band_steps or (cfg.steps,) * N_BANDS
    taus = cfg.band_temperatures or (cfg.temperature,) * N_BANDS
    gen = _generator(rng)
    frames = mel.values.shape[0]
    hop = estimators[0].cfg.hop_size
    total = frames * hop
    length = total if length is None else length
    if not (frames - 1) * hop < length <= total:
        raise ValueError(f"length {length} inconsistent with {frames} mel frames")
    band_len = total // N_BANDS
    bands = []
    for k, (e, prior) in enumerate(zip(estimators, priors)):
        if not e.cfg.multiband or e.cfg.band != k:
            raise ValueError(f"estimator {k} is not configured for band {k}")
        _check_prior(prior, mel)
        e.eval()
        std = prior_to_sample_std(prior, hop // N_BANDS, band_len)[None]
        x0 = sample_prior(PriorSpec(std, cfg.noise_scale, taus[k]), band_len, gen, dtype=e.dtype)
        lower = torch.stack(bands, dim=1) if bands else None
        cond = e.encode(_mel_tensor(e, mel))
        band_cfg = replace(cfg, steps=steps[k])
        x0 = x0.to(_device(e))
        bands.append(integrate(lambda t, x: e(x, t, cond, freeu=cfg.freeu, lower=lower), x0, band_cfg))
    y = packet_merge(BandComponents(tuple(bands)))
    return Waveform(y[0, :length].cpu().double().numpy(), mel.config.sample_rate)


@dataclass(frozen=True)
class OdeBenchRow:
    method: str
    steps: int
    wall_ms: float
    mstft: float


def bench_ode(e: PeriodWaveEstimator, mel: MelSpec, prior: PriorTrack, methods=METHODS,
              step_counts=(1, 2, 4, 8, 16, 32), seed: int = 0, reference_steps: int = 256,
              temperature: float = TEMPERATURE, mstft_cfg: MstftConfig | None = None) -> list[OdeBenchRow]:
    """Compare solvers against a fine midpoint rendering from the same prior draw."""
    hop = e.cfg.hop_size
    total = mel.values.shape[0] * hop
    std = prior_to_sample_std(prior, hop, total)[None]
    x0 = sample_prior(PriorSpec(std, NOISE_SCALE, temperature), total,
                      torch.Generator().manual_seed(seed), dtype=e.dtype)
    ref_cfg = SamplerConfig("midpoint", reference_steps, temperature)
    reference = synthesize(e, mel, prior, ref_cfg, x0=x0).samples
    rows = []
    for method in methods:
        for n in step_counts:
            cfg = SamplerConfig(method, n, temperature)
            t0 = time.perf_counter()
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                out = synthesize(e, mel, prior, cfg, x0=x0).samples
            wall = 1e3 * (time.perf_counter() - t0)
            rows.append(OdeBenchRow(method, n, wall, mstft_distance(reference, out, mstft_cfg)))
    return rows


def write_bench_csv(rows: list[OdeBenchRow], path):
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["method", "steps", "wall_ms", "mstft"])
        for r in rows:
            w.writerow([r.method, r.steps, f"{r.wall_ms:.3f}", f"{r.mstft:.6f}"])
