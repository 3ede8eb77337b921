"""Command-line entry point: ``periodwave <subcommand> ...``.

Configuration is a JSON object of flat dotted keys (``"train.lr": 2e-4``)
passed with ``--config``; explicit flags override it. Set
``PERIODWAVE_DEVICE`` to choose the torch device (default ``cpu``).
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np
import torch

from .audio import Waveform, load_wav, save_wav
from .estimator import init_estimator, load_checkpoint, save_checkpoint
from .flow import TrainLog, make_train_state, train
from .metrics import bench_speed, mstft_distance
from .runconfig import RunConfig, load_config_file, resolve, write_manifest
from .sampler import METHODS, bench_ode, synthesize, synthesize_mb, write_bench_csv
from .spectral import (
    FULL_BAND,
    MelSpec,
    band_priors,
    energy_prior,
    load_mel,
    mel_spectrogram,
)
from .wavelet import N_BANDS, BandComponents, packet_merge, packet_split

logger = logging.getLogger("periodwave")


class CliError(Exception):
    pass


def _band_steps(text: str) -> list:
    try:
        steps = [int(s) for s in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected four comma-separated integers, got {text!r}")
    if len(steps) != N_BANDS or min(steps) < 1:
        raise argparse.ArgumentTypeError(f"expected four positive integers, got {text!r}")
    return steps


def _common(p: argparse.ArgumentParser):
    p.add_argument("--config", help="JSON file of flat dotted config keys")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="output file or directory")


def _sampling(p: argparse.ArgumentParser):
    p.add_argument("--steps", type=int, help="ODE steps (default 16)")
    p.add_argument("--method", choices=METHODS, help="ODE solver (default midpoint)")
    p.add_argument("--tau", type=float, help="prior temperature (default 0.667)")
    p.add_argument("--freeu-alpha", type=float, help="skip scale; enables FreeU")
    p.add_argument("--freeu-beta", type=float, help="backbone scale; enables FreeU")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="periodwave", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train an estimator; writes checkpoints and a JSONL log")
    _common(p)
    p.add_argument("wavs", nargs="*", help="training clips (added to data.train_files)")
    p.add_argument("--max-steps", type=int)
    p.add_argument("--checkpoint-every", type=int, default=0)

    p = sub.add_parser("synth", help="checkpoint + mel (wav or mel binary) -> wav")
    _common(p)
    _sampling(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("input", help="wav file or mel binary written by save_mel")

    p = sub.add_parser("synth-mb", help="four band checkpoints + mel -> wav")
    _common(p)
    _sampling(p)
    p.add_argument("--checkpoints", nargs=N_BANDS, required=True, metavar="DIR")
    p.add_argument("--band-steps", type=_band_steps, help="per-band steps, e.g. 16,8,4,4")
    p.add_argument("input")

    p = sub.add_parser("dwt", help="split a wav into four wavelet bands, or merge them back")
    _common(p)
    p.add_argument("input", help="wav file, or a directory of band wavs with --merge")
    p.add_argument("--roundtrip", action="store_true", help="report reconstruction error only")
    p.add_argument("--merge", action="store_true")

    p = sub.add_parser("eval", help="M-STFT distance of generated vs reference wavs -> CSV")
    _common(p)
    p.add_argument("ref_dir")
    p.add_argument("gen_dir")

    p = sub.add_parser("bench-ode", help="solver accuracy/speed sweep -> CSV")
    _common(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--methods", default=",".join(METHODS))
    p.add_argument("--step-list", default="1,2,4,8,16,32")
    p.add_argument("--reference-steps", type=int, default=256)
    p.add_argument("--tau", type=float)
    p.add_argument("input")

    p = sub.add_parser("bench-speed", help="synthesis real-time factor -> JSON")
    _common(p)
    _sampling(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--reps", type=int, default=3)
    p.add_argument("input")
    return parser


def _resolve(args) -> RunConfig:
    file_values = load_config_file(args.config) if getattr(args, "config", None) else {}
    flags = {"seed": getattr(args, "seed", None)}
    for attr, key in [("steps", "sampler.steps"), ("method", "sampler.method"),
                      ("tau", "sampler.temperature"), ("band_steps", "sampler.per_band_steps"),
                      ("max_steps", "train.max_steps")]:
        flags[key] = getattr(args, attr, None)
    alpha, beta = getattr(args, "freeu_alpha", None), getattr(args, "freeu_beta", None)
    if alpha is not None or beta is not None:
        flags["sampler.freeu.enabled"] = True
        flags["sampler.freeu.skip_scale"] = alpha
        flags["sampler.freeu.backbone_scale"] = beta
    return resolve(file_values, flags)


def _device() -> torch.device:
    try:
        return torch.device(os.environ.get("PERIODWAVE_DEVICE", "cpu"))
    except RuntimeError as exc:
        raise CliError(f"bad PERIODWAVE_DEVICE: {exc}")


def _load_model(directory):
    if not (Path(directory) / "manifest.json").is_file():
        raise CliError(f"missing checkpoint: {directory}")
    model, _ = load_checkpoint(directory)
    return model.to(_device())


def _read_mel(path, cfg: RunConfig) -> tuple[MelSpec, int]:
    """Mel and target length in samples from a wav or a mel binary."""
    path = Path(path)
    if path.suffix.lower() == ".wav":
        w = load_wav(path)
        mel = mel_spectrogram(w, cfg.mel)
        return mel, len(w)
    mel = load_mel(path)
    return mel, mel.values.shape[0] * mel.config.hop_size


def _out(args, default: str) -> Path:
    return Path(args.out or default)


def _manifest_path(out: Path) -> Path:
    return out / "manifest.json" if out.suffix == "" else out.with_name(out.name + ".manifest.json")


def cmd_train(args, cfg: RunConfig, argv) -> int:
    out = _out(args, "run")
    out.mkdir(parents=True, exist_ok=True)
    files = list(cfg.data.train_files) + list(args.wavs)
    max_steps = cfg.train.max_steps
    model = init_estimator(cfg.estimator, cfg.seed).to(_device())
    state = make_train_state(model, cfg.train)
    resolved = replace(cfg, data=replace(cfg.data, train_files=tuple(files)))
    write_manifest(out / "manifest.json", "train", resolved, argv)

    def checkpoint(st):
        save_checkpoint(st.model, out / f"ckpt_{st.step:08d}", seed=cfg.seed, step=st.step)

    if max_steps > 0:
        if not files:
            raise CliError("no training data: pass wav files or set data.train_files")
        waves = [load_wav(f) for f in files]
        log = TrainLog(out / "train_log.jsonl")
        train(state, waves, cfg.train, max_steps, seed=cfg.seed, mel_cfg=cfg.mel, log=log,
              on_checkpoint=checkpoint, checkpoint_every=args.checkpoint_every)
    if not (out / f"ckpt_{state.step:08d}").exists():
        checkpoint(state)
    print(f"wrote {out / f'ckpt_{state.step:08d}'}")
    return 0


def cmd_synth(args, cfg: RunConfig, argv) -> int:
    model = _load_model(args.checkpoint)
    mel, length = _read_mel(args.input, cfg)
    prior = energy_prior(mel, FULL_BAND["bins"], FULL_BAND["energy_min"], FULL_BAND["energy_max"])
    w = synthesize(model, mel, prior, cfg.sampler, rng=cfg.seed, length=length)
    out = _out(args, "synth.wav")
    save_wav(w, out)
    write_manifest(_manifest_path(out), "synth", cfg, argv, {"checkpoint": str(args.checkpoint)})
    print(f"wrote {out}")
    return 0


def cmd_synth_mb(args, cfg: RunConfig, argv) -> int:
    models = [_load_model(d) for d in args.checkpoints]
    mel, length = _read_mel(args.input, cfg)
    priors = band_priors(mel)
    w = synthesize_mb(models, mel, priors, cfg.sampler, rng=cfg.seed, length=length)
    out = _out(args, "synth_mb.wav")
    save_wav(w, out)
    energies = _band_energies(w)
    write_manifest(_manifest_path(out), "synth-mb", cfg, argv,
                   {"checkpoints": [str(d) for d in args.checkpoints], "band_energies": energies})
    print(json.dumps({"out": str(out), "band_energies": energies}))
    return 0


def _band_energies(w: Waveform) -> list:
    x = w.samples
    pad = (-len(x)) % N_BANDS
    bands = packet_split(np.pad(x, (0, pad)))
    return [float(np.mean(b ** 2)) for b in bands.bands]


def cmd_dwt(args, cfg: RunConfig, argv) -> int:
    if args.merge:
        src = Path(args.input)
        parts = [load_wav(src / f"band{k}.wav") for k in range(N_BANDS)]
        meta = json.loads((src / "bands.json").read_text()) if (src / "bands.json").exists() else {}
        merged = packet_merge(BandComponents(tuple(p.samples for p in parts)))
        length = meta.get("length", len(merged))
        out = _out(args, "merged.wav")
        save_wav(Waveform(merged[:length], parts[0].sample_rate * N_BANDS), out)
        print(f"wrote {out}")
        return 0
    w = load_wav(args.input)
    pad = (-len(w)) % N_BANDS
    x = np.pad(w.samples, (0, pad))
    bands = packet_split(x)
    err = float(np.max(np.abs(packet_merge(bands)[: len(w)] - w.samples)))
    if args.roundtrip:
        print(json.dumps({"max_abs_error": err, "ok": err < 1e-6}))
        return 0 if err < 1e-6 else 1
    out = _out(args, "bands")
    out.mkdir(parents=True, exist_ok=True)
    for k, b in enumerate(bands.bands):
        save_wav(Waveform(b, w.sample_rate / N_BANDS), out / f"band{k}.wav")
    (out / "bands.json").write_text(json.dumps({"length": len(w), "sample_rate": w.sample_rate}))
    write_manifest(out / "manifest.json", "dwt", cfg, argv)
    print(json.dumps({"out": str(out), "max_abs_error": err}))
    return 0


def cmd_eval(args, cfg: RunConfig, argv) -> int:
    ref_dir, gen_dir = Path(args.ref_dir), Path(args.gen_dir)
    for d in (ref_dir, gen_dir):
        if not d.is_dir():
            raise CliError(f"not a directory: {d}")
    refs = sorted(ref_dir.glob("*.wav"))
    if not refs:
        raise CliError(f"no wav files in {ref_dir}")
    rows = []
    for ref in refs:
        gen = gen_dir / ref.name
        if not gen.exists():
            logger.warning("no generated file for %s", ref.name)
            continue
        r, g = load_wav(ref).samples, load_wav(gen).samples
        n = min(len(r), len(g))
        rows.append((ref.name, mstft_distance(r[:n], g[:n])))
    if not rows:
        raise CliError("no matching file names between the two directories")
    out = _out(args, "eval.csv")
    with open(out, "w", newline="") as f:
        wr = csv.writer(f)
        wr.writerow(["file", "mstft"])
        for name, d in rows:
            wr.writerow([name, f"{d:.6f}"])
        wr.writerow(["mean", f"{np.mean([d for _, d in rows]):.6f}"])
    write_manifest(_manifest_path(out), "eval", cfg, argv)
    print(f"wrote {out} ({len(rows)} files)")
    return 0


def _int_list(text: str) -> list:
    return [int(s) for s in text.split(",") if s]


def cmd_bench_ode(args, cfg: RunConfig, argv) -> int:
    model = _load_model(args.checkpoint)
    mel, _ = _read_mel(args.input, cfg)
    prior = energy_prior(mel, FULL_BAND["bins"], FULL_BAND["energy_min"], FULL_BAND["energy_max"])
    methods = [m for m in args.methods.split(",") if m]
    bad = set(methods) - set(METHODS)
    if bad:
        raise CliError(f"unknown methods {sorted(bad)}")
    rows = bench_ode(model, mel, prior, methods, _int_list(args.step_list), seed=cfg.seed,
                     reference_steps=args.reference_steps, temperature=cfg.sampler.temperature)
    out = _out(args, "bench_ode.csv")
    write_bench_csv(rows, out)
    write_manifest(_manifest_path(out), "bench-ode", cfg, argv)
    print(f"wrote {out}")
    return 0


def cmd_bench_speed(args, cfg: RunConfig, argv) -> int:
    model = _load_model(args.checkpoint)
    mel, length = _read_mel(args.input, cfg)
    prior = energy_prior(mel, FULL_BAND["bins"], FULL_BAND["energy_min"], FULL_BAND["energy_max"])
    report = bench_speed(lambda: synthesize(model, mel, prior, cfg.sampler, rng=cfg.seed, length=length),
                         reps=args.reps)
    out = _out(args, "bench_speed.json")
    out.write_text(report.to_json())
    write_manifest(_manifest_path(out), "bench-speed", cfg, argv)
    print(report.to_json())
    return 0


COMMANDS = {
    "train": cmd_train,
    "synth": cmd_synth,
    "synth-mb": cmd_synth_mb,
    "dwt": cmd_dwt,
    "eval": cmd_eval,
    "bench-ode": cmd_bench_ode,
    "bench-speed": cmd_bench_speed,
}


def run(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = _resolve(args)
        return COMMANDS[args.command](args, cfg, argv)
    except (CliError, FileNotFoundError, ValueError, FloatingPointError) as exc:
        print(f"periodwave {args.command}: error: {exc}", file=sys.stderr)
        return 1


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
