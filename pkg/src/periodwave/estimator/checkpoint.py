"""Directory checkpoints: a JSON manifest plus one raw float32 file per tensor."""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np
import torch

from .config import EstimatorConfig
from .model import PeriodWaveEstimator

FORMAT = "periodwave-checkpoint/1"
MANIFEST = "manifest.json"


def _sha256(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def save_checkpoint(model: PeriodWaveEstimator, directory, seed: int = 0, step: int = 0,
                    extra: dict | None = None) -> Path:
    directory = Path(directory)
    (directory / "tensors").mkdir(parents=True, exist_ok=True)
    entries = []
    for name, tensor in model.state_dict().items():
        data = tensor.detach().cpu().to(torch.float32).contiguous().numpy().astype("<f4").tobytes()
        fname = f"tensors/{name}.f32"
        (directory / fname).write_bytes(data)
        entries.append(
            {
                "name": name,
                "shape": list(tensor.shape),
                "dtype": "float32",
                "file": fname,
                "sha256": _sha256(data),
            }
        )
    manifest = {
        "format": FORMAT,
        "config": model.cfg.to_dict(),
        "seed": seed,
        "step": step,
        "tensors": entries,
    }
    if extra:
        manifest["extra"] = extra
    (directory / MANIFEST).write_text(json.dumps(manifest, indent=2))
    return directory


def read_manifest(directory) -> dict:
    path = Path(directory) / MANIFEST
    if not path.is_file():
        raise FileNotFoundError(f"no checkpoint manifest at {path}")
    manifest = json.loads(path.read_text())
    if manifest.get("format") != FORMAT:
        raise ValueError(f"{path}: unsupported checkpoint format {manifest.get('format')!r}")
    return manifest


def load_checkpoint(directory, verify: bool = True) -> tuple[PeriodWaveEstimator, dict]:
    """Rebuild the estimator from its manifest; returns (model, manifest)."""
    directory = Path(directory)
    manifest = read_manifest(directory)
    model = PeriodWaveEstimator(EstimatorConfig.from_dict(manifest["config"]))
    state = {}
    for entry in manifest["tensors"]:
        data = (directory / entry["file"]).read_bytes()
        if verify and _sha256(data) != entry["sha256"]:
            raise ValueError(f"hash mismatch for tensor {entry['name']}")
        arr = np.frombuffer(data, dtype="<f4").reshape(entry["shape"])
        state[entry["name"]] = torch.from_numpy(arr.copy())
    model.load_state_dict(state, strict=True)
    model.eval()
    return model, manifest
