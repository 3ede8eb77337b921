"""Hyperparameter records for the vector-field estimator."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, fields, replace

from ..periodify import PERIODS
from ..wavelet import N_BANDS


@dataclass(frozen=True)
class MelEncoderConfig:
    n_mels: int = 100
    mel_embed_dim: int = 512
    n_blocks_stage1: int = 8
    hidden_dim_stage1: int = 1536
    drop_path: float = 0.1
    upsample_ratio: int = 4
    upsample_dim: int = 256
    n_blocks_stage2: int = 4
    hidden_dim_stage2: int = 1024
    period_strides: tuple = PERIODS
    out_dim: int = 512
    kernel_size: int = 7


@dataclass(frozen=True)
class FreeUParams:
    """Inference-time rescaling at UNet skip junctions: ``skip_scale * skip + backbone_scale * x``."""

    skip_scale: float = 0.9
    backbone_scale: float = 1.1
    enabled: bool = False

    def __post_init__(self):
        if self.skip_scale <= 0 or self.backbone_scale <= 0:
            raise ValueError("FreeU scales must be positive")

    @property
    def scales(self) -> tuple[float, float]:
        if not self.enabled:
            return 1.0, 1.0
        return self.skip_scale, self.backbone_scale


@dataclass(frozen=True)
class EstimatorConfig:
    """UNet layout.

    ``down_ratios[0]`` is the stride of the input projection and
    ``down_ratios[i + 1]`` follows DBlock ``i``. ``up_ratios[i]`` undoes
    ``down_ratios[i + 1]``, so both lists read in the same order.
    """

    periods: tuple = PERIODS
    down_ratios: tuple = (1, 4, 4, 4)
    up_ratios: tuple = (4, 4, 4)
    dblock_dims: tuple = (32, 64, 128)
    mblock_dim: int = 512
    ublock_dims: tuple = (128, 64, 32)
    res_kernel: tuple = (3, 3)
    res_dilations: tuple = (1, 2)
    final_res_kernel: tuple = (3, 3, 3)
    final_res_dilations: tuple = (1, 2, 4)
    time_embed_dim: int = 256
    period_embed_dim: int = 256
    mlp_dims: tuple = (512, 2048, 512)
    activation: str = "silu"
    multiband: bool = False
    band: int | None = None
    hop_size: int = 256
    mel_encoder: MelEncoderConfig = field(default_factory=MelEncoderConfig)

    def __post_init__(self):
        self.validate()

    @property
    def signal_stride(self) -> int:
        """Waveform samples per estimator input sample (4 for wavelet bands)."""
        return N_BANDS if self.multiband else 1

    @property
    def in_channels(self) -> int:
        return 1 + (self.band if self.multiband else 0)

    @property
    def unet_stride(self) -> int:
        return math.prod(self.down_ratios)

    @property
    def cond_hop(self) -> int:
        """Input samples per conditioning step."""
        return self.hop_size // self.mel_encoder.upsample_ratio // self.signal_stride

    def validate(self):
        if len(self.down_ratios) != len(self.dblock_dims) + 1:
            raise ValueError("need one down ratio per DBlock plus the input stage")
        if tuple(self.up_ratios) != tuple(self.down_ratios[1:]):
            raise ValueError("up_ratios must mirror down_ratios[1:]")
        if tuple(self.ublock_dims) != tuple(reversed(self.dblock_dims)):
            raise ValueError("ublock_dims must mirror dblock_dims for additive skips")
        if len(self.res_kernel) != len(self.res_dilations):
            raise ValueError("res_kernel and res_dilations differ in length")
        if len(self.final_res_kernel) != len(self.final_res_dilations):
            raise ValueError("final_res_kernel and final_res_dilations differ in length")
        if any(k % 2 == 0 for k in (*self.res_kernel, *self.final_res_kernel)):
            raise ValueError("kernel sizes must be odd")
        if min(self.periods) < 1 or len(set(self.periods)) != len(self.periods):
            raise ValueError("periods must be distinct positive integers")
        if self.time_embed_dim != self.period_embed_dim:
            raise ValueError("time and period embeddings must share a width")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        if self.down_ratios[0] != 1:
            raise ValueError("the input stage must not downsample")
        mel = self.mel_encoder
        if tuple(mel.period_strides) != tuple(self.periods):
            raise ValueError("mel encoder strides must equal the estimator periods")
        if mel.out_dim != self.mblock_dim:
            raise ValueError("mel encoder output dim must equal the MBlock dim")
        if self.multiband:
            if self.band is None or not 0 <= self.band < N_BANDS:
                raise ValueError(f"multiband estimators need a band index in [0, {N_BANDS})")
        elif self.band is not None:
            raise ValueError("band index given for a full-band estimator")
        per_step = self.hop_size // mel.upsample_ratio
        if self.signal_stride * self.unet_stride != per_step:
            raise ValueError(
                f"middle block stride {self.signal_stride * self.unet_stride} must equal "
                f"the conditioning hop {per_step}"
            )

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "EstimatorConfig":
        d = dict(d)
        mel = MelEncoderConfig(**_tuplify(d.pop("mel_encoder", {})))
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown estimator config keys: {sorted(unknown)}")
        return cls(mel_encoder=mel, **_tuplify(d))


ACTIVATIONS = ("silu", "relu", "leaky_relu")


def _tuplify(d: dict) -> dict:
    return {k: tuple(v) if isinstance(v, list) else v for k, v in d.items()}


def full_band_config(**overrides) -> EstimatorConfig:
    return replace(EstimatorConfig(), **overrides)


def multiband_config(band: int, **overrides) -> EstimatorConfig:
    """Per-band layout: the first 4x stage is taken over by the wavelet split."""
    base = EstimatorConfig(
        down_ratios=(1, 4, 4, 1),
        up_ratios=(4, 4, 1),
        dblock_dims=(32, 128, 512),
        ublock_dims=(512, 128, 32),
        multiband=True,
        band=band,
    )
    return replace(base, **overrides)


def tiny_config(multiband: bool = False, band: int | None = None, **overrides) -> EstimatorConfig:
    """Small layout for tests and toy training runs (well under 1M parameters)."""
    mel = MelEncoderConfig(
        mel_embed_dim=32,
        n_blocks_stage1=2,
        hidden_dim_stage1=64,
        drop_path=0.0,
        upsample_dim=16,
        n_blocks_stage2=1,
        hidden_dim_stage2=32,
        out_dim=32,
    )
    mel = replace(mel, **overrides.pop("mel_encoder", {}))
    common = dict(
        mblock_dim=32,
        time_embed_dim=32,
        period_embed_dim=32,
        mlp_dims=(64, 128, 64),
        mel_encoder=mel,
    )
    if multiband:
        common.update(
            down_ratios=(1, 4, 4, 1),
            up_ratios=(4, 4, 1),
            dblock_dims=(4, 8, 16),
            ublock_dims=(16, 8, 4),
            multiband=True,
            band=band,
        )
    else:
        common.update(dblock_dims=(4, 8, 16), ublock_dims=(16, 8, 4))
    common.update(overrides)
    return EstimatorConfig(**common)
