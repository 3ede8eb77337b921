import warnings

import numpy as np
import pytest
import torch

from periodwave.audio import Waveform
from periodwave.estimator import FreeUParams, init_estimator, tiny_config
from periodwave.sampler import SamplerConfig, bench_ode, integrate, synthesize, synthesize_mb
from periodwave.spectral import band_priors, energy_prior, mel_spectrogram


def _mel(n=2048):
    t = np.arange(n) / 24000
    return mel_spectrogram(Waveform(0.3 * np.sin(2 * np.pi * 200 * t), 24000))


def test_config_validation():
    with pytest.raises(ValueError):
        SamplerConfig(method="heun")
    with pytest.raises(ValueError):
        SamplerConfig(steps=0)
    with pytest.raises(ValueError):
        SamplerConfig(per_band_steps=(16, 8, 4))
    assert (SamplerConfig().method, SamplerConfig().steps, SamplerConfig().temperature) == (
        "midpoint", 16, 0.667)


def test_constant_field_is_exact_for_every_method():
    for method in ("euler", "midpoint", "rk4"):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            x = integrate(lambda t, x: np.full_like(x, 2.0), np.zeros(3), SamplerConfig(method, 3))
        np.testing.assert_allclose(x, 2.0)


def test_linear_in_time_field():
    # dx/dt = t: midpoint and rk4 are exact, euler has error h/2
    f = lambda t, x: np.full_like(x, t)  # noqa: E731
    mid = integrate(f, np.zeros(1), SamplerConfig("midpoint", 4))
    eul = integrate(f, np.zeros(1), SamplerConfig("euler", 4))
    np.testing.assert_allclose(mid, 0.5)
    np.testing.assert_allclose(eul, 0.5 - 0.125)


def test_rk4_warns_and_nonfinite_raises():
    with pytest.warns(UserWarning):
        integrate(lambda t, x: -x, np.ones(2), SamplerConfig("rk4", 2))
    with pytest.raises(FloatingPointError, match="step 1"):
        integrate(lambda t, x: x * np.inf, np.ones(2), SamplerConfig("euler", 4))


@pytest.fixture(scope="module")
def tiny():
    return init_estimator(tiny_config(), seed=0).eval()


def test_synthesize_length_and_zero_temperature(tiny):
    mel = _mel()
    prior = energy_prior(mel)
    cfg = SamplerConfig(steps=2, temperature=0.0)
    a = synthesize(tiny, mel, prior, cfg, rng=1, length=2000)
    b = synthesize(tiny, mel, prior, cfg, rng=2, length=2000)
    assert len(a) == 2000 and a.sample_rate == 24000
    np.testing.assert_array_equal(a.samples, b.samples)
    c = synthesize(tiny, mel, prior, SamplerConfig(steps=2), rng=1)
    assert len(c) == mel.frames * 256
    with pytest.raises(ValueError):
        synthesize(tiny, mel, prior, cfg, length=mel.frames * 256 + 1)


def test_synthesize_freeu_changes_output(tiny):
    mel = _mel()
    prior = energy_prior(mel)
    base = SamplerConfig(steps=2, temperature=0.0)
    a = synthesize(tiny, mel, prior, base).samples
    b = synthesize(tiny, mel, prior, SamplerConfig(steps=2, temperature=0.0,
                                                   freeu=FreeUParams(0.9, 1.1, enabled=True))).samples
    assert not np.allclose(a, b)


def _band_models(zero=False):
    models = []
    for k in range(4):
        m = init_estimator(tiny_config(multiband=True, band=k), seed=k).eval()
        if zero:
            with torch.no_grad():
                for p in m.parameters():
                    p.zero_()
        models.append(m)
    return models


def test_synthesize_mb_zero_estimators_give_silence():
    mel = _mel()
    w = synthesize_mb(_band_models(zero=True), mel, band_priors(mel),
                      SamplerConfig(temperature=0.0, per_band_steps=(4, 2, 1, 1)))
    assert len(w) == mel.frames * 256
    np.testing.assert_array_equal(w.samples, 0.0)


def test_synthesize_mb_checks_band_order():
    mel = _mel()
    models = _band_models()
    with pytest.raises(ValueError):
        synthesize_mb(models[::-1], mel, band_priors(mel), SamplerConfig(steps=1))


def test_bench_ode_rows(tiny):
    mel = _mel()
    rows = bench_ode(tiny, mel, energy_prior(mel), methods=("euler", "midpoint"), step_counts=(1, 4),
                     reference_steps=8)
    assert [(r.method, r.steps) for r in rows] == [("euler", 1), ("euler", 4), ("midpoint", 1),
                                                   ("midpoint", 4)]
    assert all(np.isfinite(r.mstft) and r.wall_ms > 0 for r in rows)
