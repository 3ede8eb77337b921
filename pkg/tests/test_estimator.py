import json

import numpy as np
import pytest
import torch

from periodwave.estimator import (
    EstimatorConfig,
    FreeUParams,
    count_parameters,
    init_estimator,
    load_checkpoint,
    save_checkpoint,
    tiny_config,
)
from periodwave.estimator.config import multiband_config
from periodwave.estimator.layers import GRN, SinusoidalEmbedding

HOP = 256


@pytest.fixture(scope="module")
def tiny():
    return init_estimator(tiny_config(), seed=3).eval()


def _inputs(model, frames=4, batch=2, seed=0, length=None):
    g = torch.Generator().manual_seed(seed)
    L = length or model.input_length(frames)
    x = torch.randn(batch, L, generator=g)
    mel = torch.randn(batch, frames, model.cfg.mel_encoder.n_mels, generator=g)
    return x, mel


def test_config_validation():
    with pytest.raises(ValueError):
        EstimatorConfig(up_ratios=(4, 4, 2))
    with pytest.raises(ValueError):
        EstimatorConfig(ublock_dims=(128, 64, 16))
    with pytest.raises(ValueError):
        EstimatorConfig(activation="tanh")
    with pytest.raises(ValueError):
        EstimatorConfig(periods=(1, 2, 2, 5, 7))
    with pytest.raises(ValueError):
        EstimatorConfig(down_ratios=(1, 4, 4, 2))
    with pytest.raises(ValueError):
        EstimatorConfig(multiband=True, band=None)
    with pytest.raises(ValueError):
        EstimatorConfig(band=1)


def test_config_dict_roundtrip():
    for cfg in (EstimatorConfig(), multiband_config(2), tiny_config(multiband=True, band=3)):
        again = EstimatorConfig.from_dict(json.loads(json.dumps(cfg.to_dict())))
        assert again == cfg
    with pytest.raises(ValueError):
        EstimatorConfig.from_dict({"bogus": 1})


def test_freeu_params():
    assert FreeUParams().scales == (1.0, 1.0)
    assert FreeUParams(0.9, 1.1, enabled=True).scales == (0.9, 1.1)
    with pytest.raises(ValueError):
        FreeUParams(0.0, 1.0)


def test_time_embedding_known_values():
    emb = SinusoidalEmbedding(8, scale=1000.0)
    t = torch.tensor([0.0, 0.25], dtype=torch.float64)
    out = emb(t)
    freqs = np.exp(-np.log(10000.0) * np.arange(4) / 3)
    args = 1000.0 * 0.25 * freqs
    np.testing.assert_allclose(out[0].numpy(), [0, 0, 0, 0, 1, 1, 1, 1], atol=1e-12)
    np.testing.assert_allclose(out[1].numpy(), np.concatenate([np.sin(args), np.cos(args)]), rtol=1e-10)


def test_grn_zero_init_is_identity():
    x = torch.randn(2, 9, 5)
    torch.testing.assert_close(GRN(5)(x), x)


def test_output_shape_and_crop(tiny):
    cond_frames = 5
    for L in (tiny.input_length(cond_frames), tiny.input_length(cond_frames) - 37):
        x, mel = _inputs(tiny, frames=cond_frames, length=L)
        with torch.no_grad():
            v = tiny(x, 0.3, tiny.encode(mel))
        assert v.shape == x.shape


def test_input_errors(tiny):
    x, mel = _inputs(tiny)
    cond = tiny.encode(mel)
    with pytest.raises(ValueError):
        tiny(x, 1.5, cond)
    with pytest.raises(ValueError):
        tiny(torch.full_like(x, float("nan")), 0.5, cond)
    with pytest.raises(ValueError):
        tiny(x[:, :-HOP], 0.5, cond)
    with pytest.raises(ValueError):
        tiny(x, 0.5, cond, lower=x[:, None])
    with pytest.raises(ValueError):
        tiny.encode(torch.randn(1, 4, 80))


def test_time_per_item_matches_scalar(tiny):
    x, mel = _inputs(tiny)
    cond = tiny.encode(mel)
    with torch.no_grad():
        a = tiny(x, 0.4, cond)
        b = tiny(x, torch.tensor([0.4, 0.4]), cond)
    torch.testing.assert_close(a, b)


def test_batched_matches_sequential_multiband():
    model = init_estimator(tiny_config(multiband=True, band=2), seed=1).eval()
    x, mel = _inputs(model, frames=3)
    lower = torch.randn(2, 2, x.shape[1])
    cond = model.encode(mel)
    with torch.no_grad():
        a = model(x, 0.7, cond, lower=lower)
        b = model(x, 0.7, cond, lower=lower, batched=True)
    assert torch.linalg.norm(a - b) / torch.linalg.norm(a) < 1e-5


def test_band_estimator_needs_lower_bands():
    model = init_estimator(tiny_config(multiband=True, band=1), seed=1).eval()
    x, mel = _inputs(model, frames=2)
    with pytest.raises(ValueError):
        model(x, 0.5, model.encode(mel))


def test_seeded_init_is_deterministic():
    a = init_estimator(tiny_config(), seed=11)
    b = init_estimator(tiny_config(), seed=11)
    c = init_estimator(tiny_config(), seed=12)
    for (n, pa), pb in zip(a.state_dict().items(), b.state_dict().values()):
        torch.testing.assert_close(pa, pb, rtol=0, atol=0, msg=n)
    assert any(not torch.equal(pa, pc) for pa, pc in zip(a.parameters(), c.parameters()))


def test_tiny_config_is_small():
    assert count_parameters(init_estimator(tiny_config())) < 1_000_000
    assert count_parameters(init_estimator(tiny_config(multiband=True, band=3))) < 1_000_000


def test_checkpoint_roundtrip(tmp_path, tiny):
    save_checkpoint(tiny, tmp_path / "ck", seed=3, step=7, extra={"note": "x"})
    model, manifest = load_checkpoint(tmp_path / "ck")
    assert manifest["step"] == 7 and manifest["seed"] == 3 and manifest["extra"] == {"note": "x"}
    assert model.cfg == tiny.cfg
    x, mel = _inputs(tiny)
    with torch.no_grad():
        torch.testing.assert_close(model(x, 0.5, model.encode(mel)), tiny(x, 0.5, tiny.encode(mel)),
                                   rtol=0, atol=0)


def test_checkpoint_detects_corruption(tmp_path, tiny):
    save_checkpoint(tiny, tmp_path / "ck")
    entry = json.loads((tmp_path / "ck" / "manifest.json").read_text())["tensors"][0]
    path = tmp_path / "ck" / entry["file"]
    data = bytearray(path.read_bytes())
    data[0] ^= 0xFF
    path.write_bytes(bytes(data))
    with pytest.raises(ValueError, match="hash"):
        load_checkpoint(tmp_path / "ck")
    with pytest.raises(FileNotFoundError):
        load_checkpoint(tmp_path / "nothing")
