"""Look at the two signal rearrangements the estimator relies on.

1. The depth-2 Haar packet splits a waveform into four quarter-rate bands,
   ordered from low to high frequency, and merges them back exactly.
2. Periodify folds a waveform into a (T / p, p) grid so that samples one
   period apart sit in the same column.

    python demos/signal_views.py
"""

import numpy as np

from periodwave.audio import Waveform
from periodwave.periodify import PERIODS, deperiodify, periodify
from periodwave.spectral import mel_spectrogram
from periodwave.wavelet import packet_merge, packet_split

sr = 24000
t = np.arange(sr) / sr
x = 0.3 * np.sin(2 * np.pi * 440 * t) + 0.1 * np.sin(2 * np.pi * 7000 * t)

bands = packet_split(x)
energy = np.array([np.sum(b ** 2) for b in bands.bands])
print("band lengths:", [len(b) for b in bands.bands])
print("band energy share:", np.round(energy / energy.sum(), 3))
print("merge error:", np.max(np.abs(packet_merge(bands) - x)))

for p in PERIODS:
    g = periodify(x, p, align=p * 64)
    assert np.array_equal(deperiodify(g), x)
    print(f"p={p}: grid {g.grid.shape}, reflect pad {g.pad}, middle-block rows {g.height // 64}")

mel = mel_spectrogram(Waveform(x, sr))
print("mel frames:", mel.frames, "bins:", mel.values.shape[1])
