import math

import torch
import torch.nn as nn
import torch.nn.functional as F


def get_activation(name: str) -> nn.Module:
    if name == "silu":
        return nn.SiLU()
    if name == "relu":
        return nn.ReLU()
    if name == "leaky_relu":
        return nn.LeakyReLU(0.1)
    raise ValueError(f"unknown activation {name!r}")


class SinusoidalEmbedding(nn.Module):
    """Fixed sinusoidal features of a scalar time in [0, 1]."""

    def __init__(self, dim: int, scale: float = 1000.0):
        super().__init__()
        assert dim % 2 == 0, "embedding dim must be even"
        self.dim = dim
        self.scale = scale

    def forward(self, t: torch.Tensor) -> torch.Tensor:
        half = self.dim // 2
        freqs = torch.exp(
            -math.log(10000.0) * torch.arange(half, device=t.device, dtype=t.dtype) / (half - 1)
        )
        args = self.scale * t[:, None] * freqs[None]
        return torch.cat([args.sin(), args.cos()], dim=-1)


class DropPath(nn.Module):
    """Per-sample stochastic depth."""

    def __init__(self, p: float = 0.0):
        super().__init__()
        self.p = p

    def forward(self, x):
        if not self.training or self.p == 0.0:
            return x
        keep = 1.0 - self.p
        mask = x.new_empty((x.shape[0],) + (1,) * (x.dim() - 1)).bernoulli_(keep)
        return x * mask / keep


class GRN(nn.Module):
    """Global response normalization over the time axis of (B, T, C) input."""

    def __init__(self, dim: int, eps: float = 1e-6):
        super().__init__()
        self.gamma = nn.Parameter(torch.zeros(1, 1, dim))
        self.beta = nn.Parameter(torch.zeros(1, 1, dim))
        self.eps = eps

    def forward(self, x):
        gx = torch.norm(x, p=2, dim=1, keepdim=True)
        nx = gx / (gx.mean(dim=-1, keepdim=True) + self.eps)
        return self.gamma * (x * nx) + self.beta + x


class ConvNeXtV2Block(nn.Module):
    def __init__(self, dim: int, hidden_dim: int, kernel_size: int = 7, drop_path: float = 0.0):
        super().__init__()
        self.dwconv = nn.Conv1d(dim, dim, kernel_size, padding=kernel_size // 2, groups=dim)
        self.norm = nn.LayerNorm(dim, eps=1e-6)
        self.pwconv1 = nn.Linear(dim, hidden_dim)
        self.act = nn.GELU()
        self.grn = GRN(hidden_dim)
        self.pwconv2 = nn.Linear(hidden_dim, dim)
        self.drop_path = DropPath(drop_path)

    def forward(self, x):
        # x: (B, C, T)
        residual = x
        x = self.dwconv(x).transpose(1, 2)
        x = self.norm(x)
        x = self.pwconv1(x)
        x = self.act(x)
        x = self.grn(x)
        x = self.pwconv2(x).transpose(1, 2)
        return residual + self.drop_path(x)


def _masked(x, mask):
    return x if mask is None else x * mask


class ResBlock2d(nn.Module):
    """Dilated 2-D residual block with additive embedding after its first conv.

    Dilation applies along the height (time / period) axis only; the width
    axis is at most a handful of columns.
    """

    def __init__(self, dim, emb_dim, kernels=(3, 3), dilations=(1, 2), activation="silu"):
        super().__init__()
        self.convs = nn.ModuleList(
            nn.Conv2d(dim, dim, k, dilation=(d, 1), padding=(d * (k - 1) // 2, (k - 1) // 2))
            for k, d in zip(kernels, dilations)
        )
        self.emb_proj = nn.Linear(emb_dim, dim)
        self.act = get_activation(activation)

    def forward(self, x, emb, mask=None):
        h = x
        for i, conv in enumerate(self.convs):
            h = conv(_masked(self.act(h), mask))
            if i == 0:
                h = h + self.emb_proj(emb)[:, :, None, None]
        return x + h


class ResStack1d(nn.Module):
    """HiFi-GAN style stack of residual dilated 1-D convolutions."""

    def __init__(self, dim, kernels=(3, 3, 3), dilations=(1, 2, 4), activation="silu"):
        super().__init__()
        self.convs = nn.ModuleList(
            nn.Conv1d(dim, dim, k, dilation=d, padding=d * (k - 1) // 2)
            for k, d in zip(kernels, dilations)
        )
        self.act = get_activation(activation)

    def forward(self, x):
        for conv in self.convs:
            x = x + conv(self.act(x))
        return x


class Resample2d(nn.Module):
    """Height-axis down/upsampling by an integer ratio.

    Ratio 1 is a pointwise channel change.
    """

    def __init__(self, cin, cout, ratio, up=False):
        super().__init__()
        self.ratio = ratio
        if ratio == 1:
            self.conv = nn.Conv2d(cin, cout, 1)
        elif up:
            self.conv = nn.ConvTranspose2d(cin, cout, (ratio, 3), stride=(ratio, 1), padding=(0, 1))
        else:
            self.conv = nn.Conv2d(cin, cout, (ratio, 3), stride=(ratio, 1), padding=(0, 1))

    def forward(self, x, mask=None):
        return self.conv(_masked(x, mask))


class InputConv2d(nn.Module):
    def __init__(self, cin, cout, kernel=3):
        super().__init__()
        self.conv = nn.Conv2d(cin, cout, kernel, padding=kernel // 2)

    def forward(self, x, mask=None):
        return self.conv(_masked(x, mask))


def pad_to(x: torch.Tensor, height: int, width: int | None = None) -> torch.Tensor:
    """Zero-pad the trailing (H, W) axes of `x` on the bottom/right."""
    h, w = x.shape[-2:]
    width = w if width is None else width
    return F.pad(x, (0, width - w, 0, height - h))
