import math

import numpy as np
import pytest
import torch
from hypothesis import given, settings
from hypothesis import strategies as st

from periodwave.periodify import (
    PERIODS,
    PeriodGrid,
    deperiodify,
    padded_length,
    periodify,
    reflect_pad,
)


@settings(max_examples=60, deadline=None)
@given(st.integers(2, 3000), st.sampled_from(PERIODS), st.sampled_from([1, 64]))
def test_roundtrip_and_layout(n, p, stride):
    x = np.random.default_rng(n).standard_normal(n)
    g = periodify(x, p, align=stride * p)
    assert g.grid.shape[-1] == p
    assert (g.original_len + g.pad) % math.lcm(p, stride * p) == 0
    assert 0 <= g.pad < math.lcm(p, stride * p)
    flat = g.grid.reshape(-1)
    i, j = g.height // 2, p - 1
    assert g.grid[i, j] == flat[i * p + j]
    np.testing.assert_array_equal(deperiodify(g), x)


def test_reflect_pad_matches_numpy():
    x = np.arange(10.0)
    for total in (10, 12, 18):
        np.testing.assert_array_equal(reflect_pad(x, total), np.pad(x, (0, total - 10), mode="reflect"))
    # pads longer than the signal keep mirroring
    assert reflect_pad(np.array([1.0, 2.0]), 5).tolist() == [1, 2, 1, 2, 1]
    assert reflect_pad(np.array([3.0]), 3).tolist() == [3, 3, 3]


def test_torch_batches():
    x = torch.randn(2, 3, 101)
    g = periodify(x, 7, align=7 * 64)
    assert g.grid.shape == (2, 3, 448 // 7, 7)
    torch.testing.assert_close(deperiodify(g), x, rtol=0, atol=0)


def test_padded_length():
    assert padded_length(32768, 3, 3 * 64) == 32832
    assert padded_length(32768, 1, 64) == 32768
    assert padded_length(1, 5) == 5


def test_errors():
    with pytest.raises(ValueError):
        periodify(np.zeros(8), 0)
    with pytest.raises(ValueError):
        periodify(np.zeros(8), 2, align=0)
    with pytest.raises(ValueError):
        deperiodify(PeriodGrid(np.zeros((4, 2)), 3, 8, 0))
