"""Run configuration with flat dotted keys and reproducibility manifests.

Precedence, lowest to highest: built-in defaults, the ``estimator.preset``
layout, keys from the JSON config file, command-line flags.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field, fields, is_dataclass
from pathlib import Path

from . import __version__
from .estimator import EstimatorConfig, FreeUParams
from .estimator.config import full_band_config, multiband_config, tiny_config
from .flow import MULTIBAND_LR, TrainConfig
from .sampler import SamplerConfig
from .spectral import MelConfig

PRESETS = ("full", "multiband", "tiny", "tiny-multiband")


@dataclass(frozen=True)
class DataConfig:
    train_files: tuple = ()


@dataclass(frozen=True)
class RunConfig:
    mel: MelConfig = field(default_factory=MelConfig)
    estimator: EstimatorConfig = field(default_factory=EstimatorConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    sampler: SamplerConfig = field(default_factory=SamplerConfig)
    data: DataConfig = field(default_factory=DataConfig)
    seed: int = 0

    def flat(self) -> dict:
        return flatten(asdict(self))


def flatten(d: dict, prefix: str = "") -> dict:
    out = {}
    for k, v in d.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            out.update(flatten(v, key + "."))
        else:
            out[key] = list(v) if isinstance(v, tuple) else v
    return out


def _preset_estimator(preset: str, band) -> EstimatorConfig:
    if preset == "full":
        return full_band_config()
    if preset == "multiband":
        return multiband_config(0 if band is None else band)
    if preset == "tiny":
        return tiny_config()
    if preset == "tiny-multiband":
        return tiny_config(multiband=True, band=0 if band is None else band)
    raise ValueError(f"unknown estimator preset {preset!r}; choose from {PRESETS}")


def _set_nested(tree: dict, key: str, value):
    parts = key.split(".")
    node = tree
    for p in parts[:-1]:
        if not isinstance(node.get(p), dict):
            raise ValueError(f"unknown config key {key!r}")
        node = node[p]
    if parts[-1] not in node or isinstance(node[parts[-1]], dict):
        raise ValueError(f"unknown config key {key!r}")
    node[parts[-1]] = value


def _build(cls, d: dict):
    kwargs = {}
    for f in fields(cls):
        if f.name not in d:
            continue
        v = d[f.name]
        default = f.default_factory() if callable(f.default_factory) else f.default
        if isinstance(v, dict) and is_dataclass(default):
            v = _build(type(default), v)
        elif isinstance(v, list):
            v = tuple(v)
        kwargs[f.name] = v
    return cls(**kwargs)


def resolve(file_values: dict | None = None, overrides: dict | None = None) -> RunConfig:
    """Merge dotted-key dicts on top of the defaults and validate the result."""
    merged = {**(file_values or {}), **{k: v for k, v in (overrides or {}).items() if v is not None}}
    preset = merged.pop("estimator.preset", None)
    band = merged.get("estimator.band")
    base = RunConfig()
    if preset is not None:
        est = _preset_estimator(preset, band)
        train = TrainConfig(lr=MULTIBAND_LR) if est.multiband else TrainConfig()
        base = RunConfig(estimator=est, train=train)
    tree = asdict(base)
    for key, value in merged.items():
        if not isinstance(key, str):
            raise ValueError(f"config keys must be strings, got {key!r}")
        _set_nested(tree, key, value)
    try:
        est = dict(tree["estimator"])
        est_cfg = EstimatorConfig.from_dict(est)
        sampler = dict(tree["sampler"])
        sampler["freeu"] = FreeUParams(**sampler["freeu"])
        run = RunConfig(
            mel=_build(MelConfig, tree["mel"]),
            estimator=est_cfg,
            train=_build(TrainConfig, tree["train"]),
            sampler=_build(SamplerConfig, sampler),
            data=_build(DataConfig, tree["data"]),
            seed=int(tree["seed"]),
        )
    except TypeError as exc:
        raise ValueError(f"malformed config: {exc}") from exc
    if run.mel.n_mels != run.estimator.mel_encoder.n_mels:
        raise ValueError("mel.n_mels differs from estimator.mel_encoder.n_mels")
    if run.mel.hop_size != run.estimator.hop_size:
        raise ValueError("mel.hop_size differs from estimator.hop_size")
    return run


def load_config_file(path) -> dict:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"config file not found: {path}")
    try:
        values = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ValueError(f"malformed config {path}: {exc}") from exc
    if not isinstance(values, dict):
        raise ValueError(f"malformed config {path}: top level must be an object of dotted keys")
    nested = [k for k, v in values.items() if isinstance(v, dict)]
    if nested:
        raise ValueError(f"malformed config {path}: use flat dotted keys, not nested objects {nested}")
    return values


def code_version() -> str:
    """Git-style blob hash over the package version and its source files."""
    root = Path(__file__).parent
    h = hashlib.sha1()
    h.update(f"periodwave {__version__}\n".encode())
    for src in sorted(root.rglob("*.py")):
        data = src.read_bytes()
        blob = hashlib.sha1(b"blob %d\0" % len(data) + data).hexdigest()
        h.update(f"{blob} {src.relative_to(root).as_posix()}\n".encode())
    return h.hexdigest()


def write_manifest(path, command: str, cfg: RunConfig, argv: list, extra: dict | None = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    manifest = {
        "command": command,
        "argv": list(argv),
        "seed": cfg.seed,
        "code_version": code_version(),
        "config": cfg.flat(),
    }
    if extra:
        manifest.update(extra)
    path.write_text(json.dumps(manifest, indent=2))
    return path
