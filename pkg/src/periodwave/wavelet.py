"""Orthonormal Haar DWT and the depth-2 wavelet packet band split.

All functions act on the last axis and accept numpy arrays or torch tensors.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

_RSQRT2 = 1.0 / math.sqrt(2.0)

N_BANDS = 4


def dwt(x):
    """Haar analysis: returns (approximation, detail), each half the length."""
    n = x.shape[-1]
    if n % 2:
        raise ValueError(f"dwt needs an even length, got {n}")
    even, odd = x[..., 0::2], x[..., 1::2]
    return (even + odd) * _RSQRT2, (even - odd) * _RSQRT2


def idwt(a, d):
    if a.shape != d.shape:
        raise ValueError(f"approximation {tuple(a.shape)} and detail {tuple(d.shape)} differ")
    even = (a + d) * _RSQRT2
    odd = (a - d) * _RSQRT2
    out = _stack_last(even, odd)
    return out.reshape(*a.shape[:-1], 2 * a.shape[-1])


def _stack_last(even, odd):
    if hasattr(even, "new_empty"):
        import torch

        return torch.stack((even, odd), dim=-1)
    import numpy as np

    return np.stack((even, odd), axis=-1)


@dataclass(frozen=True)
class BandComponents:
    """Four equal-length subbands ordered from low to high frequency."""

    bands: tuple

    def __post_init__(self):
        if len(self.bands) != N_BANDS:
            raise ValueError(f"expected {N_BANDS} bands, got {len(self.bands)}")
        shapes = {tuple(b.shape) for b in self.bands}
        if len(shapes) != 1:
            raise ValueError(f"band shapes differ: {sorted(shapes)}")

    def __getitem__(self, k):
        return self.bands[k]

    def __len__(self):
        return N_BANDS


def packet_split(x) -> BandComponents:
    """Depth-2 Haar packet split into frequency-ordered quarter bands.

    The detail branch is spectrally mirrored, so its children swap: the
    frequency order is (aa, ad, dd, da).
    """
    n = x.shape[-1]
    if n % 4:
        raise ValueError(f"packet_split needs a length divisible by 4, got {n}")
    a, d = dwt(x)
    aa, ad = dwt(a)
    da, dd = dwt(d)
    return BandComponents((aa, ad, dd, da))


def packet_merge(b: BandComponents):
    aa, ad, dd, da = b.bands
    return idwt(idwt(aa, ad), idwt(da, dd))
