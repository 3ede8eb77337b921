import librosa
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from periodwave.audio import Waveform
from periodwave.spectral import (
    BANDS,
    FULL_BAND,
    MelConfig,
    MelSpec,
    band_priors,
    energy_prior,
    load_mel,
    mel_filterbank,
    mel_spectrogram,
    prior_to_sample_std,
    save_mel,
)


def _tone(n=24000, sr=24000):
    t = np.arange(n) / sr
    return 0.5 * np.sin(2 * np.pi * 440 * t) + 0.1 * np.sin(2 * np.pi * 3000 * t)


def test_filterbank_matches_librosa():
    cfg = MelConfig()
    ref = librosa.filters.mel(sr=cfg.sample_rate, n_fft=cfg.fft_size, n_mels=cfg.n_mels,
                              fmin=cfg.fmin, fmax=cfg.fmax, htk=False, norm="slaney")
    np.testing.assert_allclose(mel_filterbank(cfg), ref, atol=1e-7)


def test_mel_matches_librosa_stft_on_padded_signal():
    cfg = MelConfig()
    x = _tone(10000)
    mel = mel_spectrogram(Waveform(x, cfg.sample_rate), cfg)
    frames = -(-len(x) // cfg.hop_size)
    side = (cfg.fft_size - cfg.hop_size) // 2
    padded = np.pad(x, (side, side + frames * cfg.hop_size - len(x)), mode="reflect")
    spec = np.abs(librosa.stft(padded, n_fft=cfg.fft_size, hop_length=cfg.hop_size,
                               win_length=cfg.win_size, window="hann", center=False))[:, :frames]
    fb = librosa.filters.mel(sr=cfg.sample_rate, n_fft=cfg.fft_size, n_mels=cfg.n_mels,
                             fmin=cfg.fmin, fmax=cfg.fmax)
    ref = np.log(np.maximum(fb @ spec, cfg.log_floor)).T
    assert mel.values.shape == (frames, cfg.n_mels)
    np.testing.assert_allclose(mel.values, ref, atol=1e-4)


@settings(max_examples=25, deadline=None)
@given(st.integers(1024, 20000))
def test_frame_count_is_ceil(n):
    mel = mel_spectrogram(Waveform(np.zeros(n), 24000))
    assert mel.frames == -(-n // 256)


def test_silence_hits_log_floor_and_segment_frames():
    mel = mel_spectrogram(Waveform(np.zeros(32768), 24000))
    assert mel.frames == 128
    np.testing.assert_array_equal(mel.values, np.log(1e-5))


def test_mel_errors():
    with pytest.raises(ValueError):
        mel_spectrogram(Waveform(np.zeros(4000), 16000))
    with pytest.raises(ValueError):
        mel_spectrogram(Waveform(np.zeros(500), 24000))
    with pytest.raises(ValueError):
        MelConfig(win_size=2048)


def test_energy_prior_closed_form():
    # constant linear energy e in every bin gives std = clip((e - min) / (max - min))
    cfg = MelConfig()
    energies = np.array([0.001, 1.0, 4.0, 50.0])
    mel = MelSpec(np.log(np.repeat(energies[:, None], cfg.n_mels, axis=1)), cfg)
    p = energy_prior(mel)
    lo, hi = FULL_BAND["energy_min"], FULL_BAND["energy_max"]
    expected = np.clip((energies - lo) / (hi - lo), 0.1, 1.0)
    np.testing.assert_allclose(p.frame_std, expected, rtol=1e-12)


def test_band_priors_use_their_own_bins():
    cfg = MelConfig()
    values = np.full((3, cfg.n_mels), np.log(1e-5))
    values[:, 85] = np.log(13.0 * 2.0)  # one loud bin inside band 2 only
    priors = band_priors(MelSpec(values, cfg))
    b = BANDS[2]
    width = b["bins"][1] - b["bins"][0]
    energy = (26.0 + (width - 1) * 1e-5) / width
    expected = np.clip((energy - b["energy_min"]) / (b["energy_max"] - b["energy_min"]), 0.1, 1)
    np.testing.assert_allclose(priors[2].frame_std, expected)
    for k in (0, 1, 3):
        np.testing.assert_array_equal(priors[k].frame_std, 0.1)
    assert [p.band_id for p in priors] == [0, 1, 2, 3]


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(-12, 4), min_size=1, max_size=20))
def test_prior_bounds(levels):
    cfg = MelConfig()
    mel = MelSpec(np.repeat(np.array(levels)[:, None], cfg.n_mels, axis=1), cfg)
    for p in [energy_prior(mel), *band_priors(mel)]:
        assert np.all(p.frame_std >= 0.1) and np.all(p.frame_std <= 1.0)


def test_prior_errors_and_expansion():
    cfg = MelConfig()
    mel = MelSpec(np.zeros((4, cfg.n_mels)), cfg)
    with pytest.raises(ValueError):
        energy_prior(mel, (0, 100), 2.0, 1.0)
    with pytest.raises(ValueError):
        energy_prior(mel, (50, 120))
    p = energy_prior(mel)
    s = prior_to_sample_std(p, 256, 1000)
    assert s.shape == (1000,)
    np.testing.assert_array_equal(s[::256], p.frame_std)
    with pytest.raises(ValueError):
        prior_to_sample_std(p, 256, 1025)


def test_mel_persistence_roundtrip(tmp_path):
    mel = mel_spectrogram(Waveform(_tone(5000), 24000))
    save_mel(mel, tmp_path / "m.bin")
    back = load_mel(tmp_path / "m.bin")
    assert back.config == mel.config
    np.testing.assert_allclose(back.values, mel.values, rtol=1e-6, atol=1e-6)
