"""Reshape 1-D signals into (length / period, period) grids and back.

Works on the last axis of numpy arrays or torch tensors.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

PERIODS = (1, 2, 3, 5, 7)
MIDDLE_STRIDE = 64


def padded_length(n: int, p: int, align: int = 1) -> int:
    """Smallest multiple of lcm(p, align) that is >= n."""
    block = math.lcm(p, align)
    return -(-n // block) * block


def reflect_indices(n: int, total: int) -> np.ndarray:
    """Indices extending range(n) to `total` by mirror reflection (edge excluded).

    Repeats the reflection when the pad is longer than the signal, and falls
    back to edge replication for single-sample signals.
    """
    idx = np.arange(total)
    if n == 1:
        return np.zeros(total, dtype=np.int64)
    period = 2 * (n - 1)
    idx = idx % period
    return np.where(idx < n, idx, period - idx)


def reflect_pad(x, total: int):
    """Right-pad the last axis of `x` to `total` samples by reflection."""
    n = x.shape[-1]
    if total == n:
        return x
    idx = reflect_indices(n, total)
    if hasattr(x, "new_empty"):
        import torch

        return x.index_select(-1, torch.as_tensor(idx, device=x.device))
    return x[..., idx]


@dataclass(frozen=True)
class PeriodGrid:
    grid: object
    period: int
    original_len: int
    pad: int

    @property
    def height(self) -> int:
        return self.grid.shape[-2]


def periodify(x, p: int, align: int = 1) -> PeriodGrid:
    """Reflect-pad `x` to a multiple of lcm(p, align) and fold it row-major into width `p`."""
    if p <= 0:
        raise ValueError(f"period must be positive, got {p}")
    if align <= 0:
        raise ValueError(f"align must be positive, got {align}")
    n = x.shape[-1]
    total = padded_length(n, p, align)
    y = reflect_pad(x, total)
    grid = y.reshape(*y.shape[:-1], total // p, p)
    return PeriodGrid(grid, p, n, total - n)


def deperiodify(g: PeriodGrid):
    h, w = g.grid.shape[-2:]
    if w != g.period or h * w != g.original_len + g.pad:
        raise ValueError(
            f"grid {h}x{w} inconsistent with period {g.period}, "
            f"length {g.original_len} and pad {g.pad}"
        )
    flat = g.grid.reshape(*g.grid.shape[:-2], h * w)
    return flat[..., : g.original_len]
