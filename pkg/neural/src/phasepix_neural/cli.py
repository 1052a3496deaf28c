"""Command-line front end for training and inference.

Subcommands mirror the two training stages plus inference.  Every run
writes a plain-text key=value log next to its primary output so results
are reproducible from the log alone.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import fields
from pathlib import Path

from .io import FormatError, ValidationError
from .models import ShapeError
from .train import CheckpointError, TrainConfig, train_hdr, train_ldr


def _write_run_log(path, subcommand: str, args) -> None:
    lines = [f"subcommand={subcommand}"]
    for key in sorted(vars(args)):
        if key == "func":
            continue
        lines.append(f"{key}={getattr(args, key)}")
    Path(path).write_text("\n".join(lines) + "\n")


def _train_config(args) -> TrainConfig:
    keys = {f.name for f in fields(TrainConfig)}
    return TrainConfig(**{k: v for k, v in vars(args).items() if k in keys})


def _cmd_train_ldr(args) -> None:
    cfg = _train_config(args)
    ckpt = train_ldr(args.manifest, cfg, args.out_dir, resume=args.resume)
    _write_run_log(Path(args.out_dir) / "ldr_run.log", "train-ldr", args)
    sys.stdout.write(f"checkpoint={ckpt}\n")


def _cmd_train_hdr(args) -> None:
    cfg = _train_config(args)
    ckpt = train_hdr(args.manifest, args.ldr_checkpoint, cfg, args.out_dir,
                     resume=args.resume)
    _write_run_log(Path(args.out_dir) / "hdr_run.log", "train-hdr", args)
    sys.stdout.write(f"checkpoint={ckpt}\n")


def _cmd_infer(args) -> None:
    from .infer import run_inference

    result = run_inference(
        args.infile, args.ldr_checkpoint, args.hdr_checkpoint, args.out,
        ldr_stack_dir=args.ldr_stack_dir,
    )
    _write_run_log(str(args.out) + ".log", "infer", args)
    sys.stdout.write(f"fused={result.output_path}\n")
    for path in result.ldr_paths:
        sys.stdout.write(f"ldr={path}\n")


def _add_train_options(p) -> None:
    p.add_argument("--manifest", required=True, help="dataset manifest.tsv")
    p.add_argument("--out-dir", required=True, help="checkpoint/curve directory")
    p.add_argument("--steps", type=int, default=200)
    p.add_argument("--learning-rate", dest="learning_rate", type=float, default=1e-3)
    p.add_argument("--batch-size", dest="batch_size", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--width", type=int, default=16)
    p.add_argument("--gamma", type=float, default=2.2,
                   help="inverse camera-response exponent")
    p.add_argument("--mu", type=float, default=5000.0)
    p.add_argument("--resume", default=None, help="checkpoint to continue from")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="phasepix-neural",
        description="Learned exposure-stack synthesis and HDR fusion for "
                    "phase-multiplexed sensor measurements.",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("train-ldr", help="fit the exposure-stack synthesis net")
    _add_train_options(p)
    p.set_defaults(func=_cmd_train_ldr)

    p = sub.add_parser("train-hdr", help="fit the fusion-weight net")
    _add_train_options(p)
    p.add_argument("--ldr-checkpoint", required=True)
    p.set_defaults(func=_cmd_train_hdr)

    p = sub.add_parser("infer", help="fuse a measurement cube into an HDR cube")
    p.add_argument("--in", dest="infile", required=True, help="measurement .vcube")
    p.add_argument("--ldr-checkpoint", required=True)
    p.add_argument("--hdr-checkpoint", required=True)
    p.add_argument("--out", required=True, help="fused .vcube path")
    p.add_argument("--ldr-stack-dir", default=None,
                   help="also write the predicted exposure stack here")
    p.set_defaults(func=_cmd_infer)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.func(args)
    except (ValidationError, FormatError, ShapeError, CheckpointError,
            ValueError, FileNotFoundError, OSError) as exc:
        print(f"error: {args.subcommand}: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
