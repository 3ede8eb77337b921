"""Period-conditional UNet vector-field estimator with a ConvNeXt V2 mel encoder."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

from ..periodify import deperiodify, periodify, reflect_pad
from ..spectral import MelSpec
from .config import EstimatorConfig, FreeUParams, MelEncoderConfig
from .layers import (
    ConvNeXtV2Block,
    InputConv2d,
    Resample2d,
    ResBlock2d,
    ResStack1d,
    SinusoidalEmbedding,
    get_activation,
    pad_to,
)


@dataclass
class CondFeatures:
    """Mel-derived conditioning, one (B, C, steps) map per period.

    Computed once per utterance and reused at every ODE step.
    """

    per_period: dict
    frames: int

    def __getitem__(self, p):
        return self.per_period[p]


class _ChannelNorm(nn.LayerNorm):
    def forward(self, x):
        return super().forward(x.transpose(1, 2)).transpose(1, 2)


class MelEncoder(nn.Module):
    def __init__(self, cfg: MelEncoderConfig):
        super().__init__()
        self.cfg = cfg
        k = cfg.kernel_size
        n_blocks = cfg.n_blocks_stage1 + cfg.n_blocks_stage2
        rates = np.linspace(0.0, cfg.drop_path, max(n_blocks, 1)).tolist()
        self.embed = nn.Conv1d(cfg.n_mels, cfg.mel_embed_dim, k, padding=k // 2)
        self.norm_in = _ChannelNorm(cfg.mel_embed_dim, eps=1e-6)
        self.stage1 = nn.Sequential(
            *[
                ConvNeXtV2Block(cfg.mel_embed_dim, cfg.hidden_dim_stage1, k, rates[i])
                for i in range(cfg.n_blocks_stage1)
            ]
        )
        self.norm1 = _ChannelNorm(cfg.mel_embed_dim, eps=1e-6)
        r = cfg.upsample_ratio
        self.upsample = nn.ConvTranspose1d(cfg.mel_embed_dim, cfg.upsample_dim, r, stride=r)
        self.stage2 = nn.Sequential(
            *[
                ConvNeXtV2Block(
                    cfg.upsample_dim, cfg.hidden_dim_stage2, k, rates[cfg.n_blocks_stage1 + i]
                )
                for i in range(cfg.n_blocks_stage2)
            ]
        )
        self.norm2 = _ChannelNorm(cfg.upsample_dim, eps=1e-6)
        self.period_proj = nn.ModuleDict(
            {str(p): nn.Conv1d(cfg.upsample_dim, cfg.out_dim, p, stride=p) for p in cfg.period_strides}
        )

    def forward(self, mel: torch.Tensor) -> dict:
        # mel: (B, n_mels, frames)
        h = self.norm_in(self.embed(mel))
        h = self.norm1(self.stage1(h))
        h = self.norm2(self.stage2(self.upsample(h)))
        steps = h.shape[-1]
        out = {}
        for p in self.cfg.period_strides:
            need = -(-steps // p) * p
            out[p] = self.period_proj[str(p)](reflect_pad(h, need))
        return out


class PeriodWaveEstimator(nn.Module):
    """Estimates the flow vector field v(t, x | mel) over several periodified views of x.

    Each period path folds x into a (T / p, p) grid, runs a shared
    time/period-conditioned 2-D UNet with the mel features added at the
    middle block, and unfolds the result. Path outputs are summed and refined
    by a 1-D residual stack.
    """

    def __init__(self, cfg: EstimatorConfig):
        super().__init__()
        cfg.validate()
        self.cfg = cfg
        emb_dim = cfg.mlp_dims[-1]
        act = cfg.activation

        self.time_embed = SinusoidalEmbedding(cfg.time_embed_dim)
        self.period_embed = nn.Embedding(len(cfg.periods), cfg.period_embed_dim)
        mlp, prev = [], cfg.time_embed_dim
        for i, d in enumerate(cfg.mlp_dims):
            if i:
                mlp.append(get_activation(act))
            mlp.append(nn.Linear(prev, d))
            prev = d
        self.mlp = nn.Sequential(*mlp)
        self.emb_act = get_activation(act)

        self.mel_encoder = MelEncoder(cfg.mel_encoder)

        res = dict(kernels=cfg.res_kernel, dilations=cfg.res_dilations, activation=act)
        dims = list(cfg.dblock_dims)
        self.input_proj = InputConv2d(cfg.in_channels, dims[0])
        self.dblocks = nn.ModuleList(ResBlock2d(d, emb_dim, **res) for d in dims)
        nexts = dims[1:] + [cfg.mblock_dim]
        self.downs = nn.ModuleList(
            Resample2d(d, n, r) for d, n, r in zip(dims, nexts, cfg.down_ratios[1:])
        )
        self.mid = ResBlock2d(cfg.mblock_dim, emb_dim, **res)
        prevs = [cfg.mblock_dim] + list(cfg.ublock_dims[:-1])
        up_order = list(reversed(cfg.up_ratios))
        self.ups = nn.ModuleList(
            Resample2d(p, u, r, up=True) for p, u, r in zip(prevs, cfg.ublock_dims, up_order)
        )
        self.ublocks = nn.ModuleList(ResBlock2d(u, emb_dim, **res) for u in cfg.ublock_dims)

        out_dim = cfg.ublock_dims[-1]
        self.final = ResStack1d(out_dim, cfg.final_res_kernel, cfg.final_res_dilations, act)
        self.final_act = get_activation(act)
        self.out_proj = nn.Conv1d(out_dim, 1, 3, padding=1)

    # -- conditioning -------------------------------------------------------

    def encode(self, mel) -> CondFeatures:
        """Mel features for every period; accepts a MelSpec or a (B, frames, n_mels) tensor."""
        if isinstance(mel, MelSpec):
            mel = torch.as_tensor(mel.values, dtype=self.dtype)[None]
        if mel.dim() == 2:
            mel = mel[None]
        if mel.shape[-1] != self.cfg.mel_encoder.n_mels:
            raise ValueError(f"expected {self.cfg.mel_encoder.n_mels} mel bins, got {mel.shape[-1]}")
        feats = self.mel_encoder(mel.to(self.dtype).transpose(1, 2))
        return CondFeatures(feats, mel.shape[1])

    @property
    def dtype(self):
        return self.out_proj.weight.dtype

    def input_length(self, frames: int) -> int:
        """Estimator input samples covered by `frames` mel frames."""
        return frames * self.cfg.hop_size // self.cfg.signal_stride

    def embeddings(self, t: torch.Tensor) -> list:
        base = self.time_embed(t)
        idx = torch.arange(len(self.cfg.periods), device=t.device)
        pe = self.period_embed(idx)
        return [self.emb_act(self.mlp(base + pe[j])) for j in range(len(self.cfg.periods))]

    # -- forward ------------------------------------------------------------

    def forward(self, x, t, cond: CondFeatures, freeu: FreeUParams | None = None,
                lower=None, batched: bool = False):
        """Vector field at state `x` (B, L) and time `t`.

        Args:
            x (Tensor): Current state, shape (B, L).
            t (float or Tensor): Time in [0, 1], scalar or shape (B,).
            cond (CondFeatures): Output of :meth:`encode`.
            freeu (FreeUParams): Skip/backbone rescaling; ``None`` disables it.
            lower (Tensor): Lower wavelet bands (B, band, L) for band estimators.
            batched (bool): Run all period paths as one zero-masked batch.

        Returns:
            Tensor: Estimated field, shape (B, L).
        """
        cfg = self.cfg
        if x.dim() != 2:
            raise ValueError(f"x must be (batch, length), got {tuple(x.shape)}")
        if not torch.isfinite(x).all():
            raise ValueError("non-finite values in estimator input")
        B, L = x.shape
        t = torch.as_tensor(t, dtype=x.dtype, device=x.device)
        if t.dim() == 0:
            t = t.expand(B)
        if ((t < 0) | (t > 1)).any():
            raise ValueError("t must lie in [0, 1]")

        inp = x[:, None]
        n_lower = cfg.in_channels - 1
        if n_lower:
            if lower is None or lower.shape[1] != n_lower:
                raise ValueError(f"band {cfg.band} estimator needs {n_lower} lower bands")
            inp = torch.cat([inp, lower.to(x.dtype)], dim=1)
        elif lower is not None:
            raise ValueError("lower bands given to an estimator without band inputs")

        T0 = self.input_length(cond.frames)
        hop = cfg.hop_size // cfg.signal_stride
        if -(-L // hop) != cond.frames:
            raise ValueError(f"{L} input samples do not match {cond.frames} conditioning frames")
        inp = reflect_pad(inp, T0)

        embs = self.embeddings(t)
        scales = (freeu or FreeUParams()).scales
        if batched:
            h = self._forward_batched(inp, embs, cond, scales)
        else:
            h = sum(
                self._forward_period(inp, p, embs[j], cond[p], scales)
                for j, p in enumerate(cfg.periods)
            )
        h = self.final(h)
        v = self.out_proj(self.final_act(h))
        return v[:, 0, :L]

    def _forward_period(self, inp, p, emb, cond, scales):
        g = periodify(inp, p, align=self.cfg.unet_stride * p)
        out = self._unet(g.grid, emb, cond, scales, masks=None)
        return deperiodify(type(g)(out, p, g.original_len, g.pad))

    def _forward_batched(self, inp, embs, cond, scales):
        cfg = self.cfg
        B = inp.shape[0]
        grids = [periodify(inp, p, align=cfg.unet_stride * p) for p in cfg.periods]
        h_max = max(g.height for g in grids)
        w_max = max(cfg.periods)
        stacked = torch.cat([pad_to(g.grid, h_max, w_max) for g in grids])
        emb = torch.cat(embs)
        mid_max = h_max // cfg.unet_stride
        cond_all = torch.cat([F.pad(cond[p], (0, mid_max - cond[p].shape[-1])) for p in cfg.periods])

        masks, stride = [], 1
        for r in (1, *cfg.down_ratios[1:]):
            stride *= r
            m = torch.zeros(len(grids) * B, 1, h_max // stride, w_max, dtype=inp.dtype,
                            device=inp.device)
            for j, g in enumerate(grids):
                m[j * B:(j + 1) * B, :, : g.height // stride, : g.period] = 1
            masks.append(m)

        out = self._unet(stacked, emb, cond_all, scales, masks)
        total = 0
        for j, g in enumerate(grids):
            part = out[j * B:(j + 1) * B, :, : g.height, : g.period]
            total = total + deperiodify(type(g)(part, g.period, g.original_len, g.pad))
        return total

    def _unet(self, h, emb, cond, scales, masks):
        def m(level):
            return None if masks is None else masks[level]

        n = len(self.dblocks)
        skip_scale, backbone_scale = scales
        h = self.input_proj(h, m(0))
        skips = []
        for i in range(n):
            h = self.dblocks[i](h, emb, m(i))
            skips.append(h)
            h = self.downs[i](h, m(i))
        if h.shape[-2] != cond.shape[-1]:
            raise ValueError(
                f"middle block height {h.shape[-2]} != conditioning length {cond.shape[-1]}"
            )
        h = h + cond[..., None]
        h = self.mid(h, emb, m(n))
        for i in range(n):
            h = self.ups[i](h, m(n - i))
            skip = skips.pop()
            if skip_scale == 1.0 and backbone_scale == 1.0:
                h = skip + h
            else:
                h = skip_scale * skip + backbone_scale * h
            h = self.ublocks[i](h, emb, m(n - i - 1))
        return h


def init_estimator(cfg: EstimatorConfig, seed: int = 0) -> PeriodWaveEstimator:
    """Build an estimator with seed-deterministic parameters."""
    with torch.random.fork_rng(devices=[]):
        torch.manual_seed(seed)
        model = PeriodWaveEstimator(cfg)
    return model


def count_parameters(model: nn.Module) -> int:
    return sum(p.numel() for p in model.parameters())
