"""Command-line entry point: ``interlat {gen-data,train,ablate,eval,gradcheck}``.

Exit codes: 0 success, 1 check failure, 2 bad config, 3 IO, 4 numeric.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import fields
from pathlib import Path

import numpy as np

from . import gradcheck, metrics, pipeline, synthdata
from .config import TrainConfig
from .errors import (
    ChecksumMismatch,
    ConfigInvalid,
    FormatVersionMismatch,
    InvalidDimension,
    IoError,
    NonFiniteError,
    UnknownClass,
)

EXIT_OK, EXIT_CHECK, EXIT_CONFIG, EXIT_IO, EXIT_NUMERIC = 0, 1, 2, 3, 4
EVAL_VERSION = 1
log = logging.getLogger("interlat")


def _config_flags(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("config overrides")
    for f in fields(TrainConfig):
        if f.name == "seed":
            continue
        group.add_argument(f"--{f.name.replace('_', '-')}", dest=f"cfg_{f.name}",
                           default=argparse.SUPPRESS, metavar=f.name.upper())


def _common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=Path, help="flat JSON config file")
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--out", type=Path, default=None, help="output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="interlat", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="write a synthetic interaction dataset")
    _common(p)
    p.add_argument("--clips", type=int, default=36)
    for name in ("f", "h", "w", "c", "d_face"):
        p.add_argument(f"--{name.replace('_', '-')}", type=int, default=None)

    for name, text in (("train", "train the toy denoiser"), ("ablate", "train the five ablation variants")):
        p = sub.add_parser(name, help=text)
        _common(p)
        _config_flags(p)
        p.add_argument("--data", type=Path, required=True, help="dataset directory")
        if name == "train":
            p.add_argument("--resume", type=Path, default=None, help="checkpoint to resume from")
            p.add_argument("--ablate", action="store_true", help="run the ablation report instead")

    p = sub.add_parser("eval", help="one-step reconstruction metrics on held-out clips")
    _common(p)
    _config_flags(p)
    p.add_argument("--data", type=Path, required=True)
    p.add_argument("--checkpoint", type=Path, required=True)

    p = sub.add_parser("gradcheck", help="finite-difference gradient suite")
    p.add_argument("--only", nargs="+", default=None, help="targets or groups, e.g. softquant")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tol", type=float, default=gradcheck.TOLERANCE)
    return parser


def load_config(args, base: dict | None = None) -> TrainConfig:
    raw = dict(base or {})
    if getattr(args, "config", None) is not None:
        try:
            raw.update(json.loads(Path(args.config).read_text()))
        except OSError as exc:
            raise IoError(f"cannot read config {args.config}: {exc}") from exc
        except ValueError as exc:
            raise ConfigInvalid(f"config {args.config} is not valid JSON: {exc}") from None
    for key, val in vars(args).items():
        if key.startswith("cfg_"):
            raw[key[4:]] = val
    if getattr(args, "seed", None) is not None:
        raw["seed"] = args.seed
    return TrainConfig.from_dict(raw)


def _load_split(path, split):
    if not synthdata.dataset_exists(path):
        raise IoError(f"no dataset in {path}")
    clips, manifest = synthdata.load_dataset(path)
    return [clips[i] for i in manifest.split(split)], manifest


def _dims_from(manifest) -> dict:
    return {k: manifest.dims[k] for k in ("f", "h", "w", "c", "d_face")}


def _print(obj) -> None:
    print(json.dumps(obj, indent=2, sort_keys=True))


def cmd_gen_data(args) -> int:
    dims = synthdata.ClipDims(**{k: v for k in ("f", "h", "w", "c", "d_face")
                                 if (v := getattr(args, k)) is not None})
    out = args.out or Path("data")
    seed = 0 if args.seed is None else args.seed
    manifest = synthdata.build_dataset(args.clips, seed, out, dims)
    _print({"out": str(out), "clips": manifest.num_clips, "train": len(manifest.split("train")),
            "test": len(manifest.split("test")), "histogram": manifest.histogram})
    return EXIT_OK


def cmd_train(args) -> int:
    clips, manifest = _load_split(args.data, "train")
    cfg = load_config(args, _dims_from(manifest))
    if getattr(args, "ablate", False):
        return _ablate(cfg, clips, args.out)
    res = pipeline.train(cfg, clips, args.out, resume_from=args.resume)
    m = res.metrics
    _print({"config_digest": m["config_digest"], "steps": m["steps"], "initial": m["initial"],
            "final": m["final"], "checkpoint": str(res.checkpoint) if res.checkpoint else None,
            "wall_time": m["wall_time"]})
    return EXIT_OK


def _ablate(cfg, clips, out) -> int:
    report = pipeline.ablate(cfg, clips, out)
    _print(report)
    return EXIT_OK


def cmd_ablate(args) -> int:
    clips, manifest = _load_split(args.data, "train")
    return _ablate(load_config(args, _dims_from(manifest)), clips, args.out)


def evaluate_checkpoint(cfg: TrainConfig, checkpoint, clips) -> dict:
    """One-step reconstruction at ``cfg.eval_t`` for each clip, with averaged metrics."""
    params, _, _, _ = pipeline.load_checkpoint(checkpoint, cfg)
    model = pipeline.ToyDenoiser(cfg, params)
    sched = pipeline.NoiseSchedule(cfg.T, cfg.beta_start, cfg.beta_end)
    rng = np.random.default_rng([cfg.seed, 3])
    per_clip = []
    for clip in clips:
        batch = pipeline.Batch.from_clips([clip])
        eps = rng.standard_normal(batch.z0.shape)
        zt = pipeline.add_noise(batch.z0, cfg.eval_t, eps, sched)
        eps_hat = pipeline.denoise_step(model, zt, cfg.eval_t, batch.masks, batch.identity)
        x0 = pipeline.predict_x0(zt, cfg.eval_t, eps_hat.data, sched)[0]
        per_clip.append(metrics.clip_report(clip.frames, np.clip(x0, -1, 1), data_range=2.0))
    mean = {k: float(np.mean([r[k] for r in per_clip])) for k in ("psnr", "ssim", "l1")}
    return {"version": EVAL_VERSION, "config_digest": cfg.digest(), "t": cfg.eval_t,
            "clips": len(per_clip), "mean": mean, "per_clip": per_clip}


def cmd_eval(args) -> int:
    clips, manifest = _load_split(args.data, "test")
    base = _dims_from(manifest)
    sidecar = args.checkpoint.parent / pipeline.METRICS_FILE
    if args.config is None and sidecar.is_file():
        try:
            base = json.loads(sidecar.read_text())["config"]
        except (OSError, ValueError, KeyError) as exc:
            raise IoError(f"cannot read {sidecar}: {exc}") from None
    if not args.checkpoint.is_file():
        raise IoError(f"no checkpoint at {args.checkpoint}")
    cfg = load_config(args, base)
    report = evaluate_checkpoint(cfg, args.checkpoint, clips)
    if args.out is not None:
        args.out.mkdir(parents=True, exist_ok=True)
        pipeline.write_json(args.out / "eval.json", report)
    _print({k: v for k, v in report.items() if k != "per_clip"})
    return EXIT_OK


def cmd_gradcheck(args) -> int:
    try:
        results = gradcheck.run_suite(args.only, seed=args.seed, tol=args.tol)
    except KeyError as exc:
        print(f"error: {exc.args[0]}", file=sys.stderr)
        return EXIT_CONFIG
    failed = [r["name"] for r in results if not r["passed"]]
    for r in results:
        status = "PASS" if r["passed"] else "FAIL"
        print(f"{status} {r['name']:<26} max_rel_error={r['max_rel_error']:.3e}")
    if failed:
        print(f"gradient check failed: {', '.join(failed)}")
        return EXIT_CHECK
    print(f"all {len(results)} gradient targets < {args.tol:g}")
    return EXIT_OK


COMMANDS = {"gen-data": cmd_gen_data, "train": cmd_train, "ablate": cmd_ablate,
            "eval": cmd_eval, "gradcheck": cmd_gradcheck}


def _limit_threads():
    try:
        n = int(os.environ.get("IA_THREADS", "1"))
    except ValueError:
        n = 1
    try:
        from threadpoolctl import threadpool_limits
    except ImportError:
        return None
    return threadpool_limits(max(1, n))


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    _limit_threads()
    try:
        return COMMANDS[args.command](args)
    except (ConfigInvalid, InvalidDimension, UnknownClass) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (IoError, FormatVersionMismatch, ChecksumMismatch) as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_IO
    except NonFiniteError as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
