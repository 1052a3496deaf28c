"""Batch command-line front end.

Subcommands compose the library into full experiments: scene generation,
forward simulation, reconstruction, metric reports, and the spectral /
SNR / PSF analyses.  Every subcommand writes a plain-text run log
(key=value, one per line) capturing all parameters and the seed, so any
run is reproducible from its log alone.  Report-style subcommands render
matplotlib figures next to their CSV output.

Grid arguments use the range syntax start:stop:step (inclusive of stop
when it lands on the grid).
"""

from __future__ import annotations

import argparse
import csv
import os
import sys
from pathlib import Path

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from . import analysis, metrics, scenes, synthesis
from .config import load_camera_config, load_pattern_config
from .core import (
    CameraModel,
    ConfigurationError,
    FormatError,
    MetricsReport,
    SamplingPattern,
    TransientSignalModel,
    ValidationError,
    load_vcube,
    save_vcube,
)
from .sensor import normalize_hdr, sample
from .synthesis import MEDIUM_GAIN, export_png_frames, mu_law_tonemap, reconstruct


def _parse_range(text: str) -> np.ndarray:
    try:
        start, stop, step = (float(v) for v in text.split(":"))
    except ValueError:
        raise ConfigurationError(f"bad range {text!r}; expected start:stop:step")
    if step <= 0 or stop < start:
        raise ConfigurationError(f"bad range {text!r}; need step > 0, stop >= start")
    return np.arange(start, stop + step / 2, step)


def _parse_ints(text: str, n: int, what: str):
    parts = text.split(":")
    if len(parts) != n:
        raise ConfigurationError(f"bad {what} {text!r}; expected {n} colon-separated ints")
    try:
        return tuple(int(v) for v in parts)
    except ValueError:
        raise ConfigurationError(f"bad {what} {text!r}; entries must be integers")


def _parse_param(text: str):
    key, sep, value = text.partition("=")
    if not sep:
        raise ConfigurationError(f"bad --param {text!r}; expected key=value")
    for conv in (int, float):
        try:
            return key, conv(value)
        except ValueError:
            pass
    if "," in value:
        try:
            return key, tuple(float(v) for v in value.split(","))
        except ValueError:
            pass
    return key, value


def _load_pattern(args) -> SamplingPattern:
    return load_pattern_config(args.pattern) if args.pattern else SamplingPattern()


def _load_camera(args) -> CameraModel:
    return load_camera_config(args.camera) if args.camera else CameraModel()


def _write_run_log(path, subcommand: str, args) -> None:
    skip = {"func", "log"}
    lines = [f"subcommand={subcommand}"]
    for key in sorted(vars(args)):
        if key in skip:
            continue
        lines.append(f"{key}={getattr(args, key)}")
    Path(path).write_text("\n".join(lines) + "\n")


def _log_path(args, default_anchor) -> Path:
    if args.log:
        return Path(args.log)
    return Path(str(default_anchor) + ".log")


def _save_figure(fig, path) -> None:
    fig.savefig(path, dpi=120)
    plt.close(fig)


# ---------------------------------------------------------------------------
# Subcommand bodies

def _cmd_gen_scene(args) -> None:
    params = dict(_parse_param(p) for p in args.param or [])
    spec = scenes.SceneSpec(
        kind=args.kind, rows=args.rows, cols=args.cols, ticks=args.ticks,
        tick_ms=args.tick_ms, params=params,
    )
    cube = scenes.gen_scene(spec)
    save_vcube(cube, args.out)
    _write_run_log(_log_path(args, args.out), "gen-scene", args)


def _cmd_simulate(args) -> None:
    cube = load_vcube(args.infile)
    if not args.no_normalize:
        cube = normalize_hdr(cube)
    y = sample(cube, _load_pattern(args), _load_camera(args), seed=args.seed)
    save_vcube(y, args.out)
    _write_run_log(_log_path(args, args.out), "simulate", args)


def _cmd_reconstruct(args) -> None:
    y = load_vcube(args.infile)
    p_hat = reconstruct(y, _load_pattern(args), _load_camera(args), method=args.method)
    if args.tonemap:
        # back to the normalized ground-truth scale, then log compression
        p_hat = mu_law_tonemap(p_hat.with_data(p_hat.data / MEDIUM_GAIN), mu=args.mu)
    save_vcube(p_hat, args.out)
    _write_run_log(_log_path(args, args.out), "reconstruct", args)


def _cmd_metrics(args) -> None:
    cube = load_vcube(args.infile)
    ref = load_vcube(args.ref) if args.ref else None
    prefix = Path(args.out_prefix)
    prefix.parent.mkdir(parents=True, exist_ok=True)
    report = MetricsReport()

    if args.psnr or args.mssim:
        if ref is None:
            raise ConfigurationError("--psnr/--mssim require --ref")
        per_frame = []
        for t in range(cube.ticks):
            row = {"tick": t}
            if args.psnr:
                row["psnr_db"] = metrics.psnr(cube.frame(t), ref.frame(t), peak=args.peak)
            if args.mssim:
                row["mssim"] = metrics.mssim(cube.frame(t), ref.frame(t))
            per_frame.append(row)
        if args.psnr:
            report.add("psnr_db", metrics.psnr(cube, ref, peak=args.peak), peak=args.peak)
        if args.mssim:
            report.add("mssim", metrics.mssim_video(cube, ref))
        with open(f"{prefix}_frames.csv", "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=list(per_frame[0]))
            writer.writeheader()
            writer.writerows(per_frame)
        fig, ax = plt.subplots(figsize=(6, 3.5))
        for key in per_frame[0]:
            if key == "tick":
                continue
            vals = [r[key] for r in per_frame]
            finite = [v for v in vals if np.isfinite(v)]
            ax.plot([r["tick"] for r in per_frame],
                    [v if np.isfinite(v) else max(finite, default=0) for v in vals],
                    label=key)
        ax.set_xlabel("tick")
        ax.set_ylabel("score")
        ax.legend()
        fig.tight_layout()
        _save_figure(fig, f"{prefix}_frames.png")

    if args.tc or args.fd:
        if args.pixel is None:
            raise ConfigurationError("--tc/--fd require --pixel row:col")
        r, c = _parse_ints(args.pixel, 2, "--pixel")
        series = cube.data[r, c, :]
        window = _parse_ints(args.window, 2, "--window") if args.window else None
        if args.tc:
            report.add("temporal_contrast", metrics.temporal_contrast(series, window),
                       pixel=args.pixel, window=args.window)
        if args.fd:
            report.add(
                "full_duration_ms",
                metrics.full_duration(series, tick_ms=cube.tick_ms, window=window,
                                      frac=args.frac),
                pixel=args.pixel, window=args.window, frac=args.frac,
            )
        t_ms = np.arange(cube.ticks) * cube.tick_ms
        fig, ax = plt.subplots(figsize=(6, 3.5))
        ax.plot(t_ms, series, marker=".", lw=1)
        ax.set_xlabel("time [ms]")
        ax.set_ylabel(f"value at pixel ({r},{c})")
        fig.tight_layout()
        _save_figure(fig, f"{prefix}_series.png")
        with open(f"{prefix}_series.csv", "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["time_ms", "value"])
            writer.writerows(zip(t_ms, series))

    if args.mtf:
        roi = _parse_ints(args.roi, 4, "--roi") if args.roi else None
        edge = metrics.slanted_edge_mtf(cube.frame(args.frame), roi=roi)
        report.add("mtf50_cpp", edge.mtf50, frame=args.frame, roi=args.roi)
        report.add("rise_10_90_px", edge.rise_10_90_px, frame=args.frame)
        report.add("edge_angle_deg", edge.edge_angle_deg, frame=args.frame)
        metrics.write_edge_csv(f"{prefix}_edge.csv", edge)
        fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 3.5))
        ax1.plot(edge.esf_positions_px, edge.esf)
        ax1.set_xlabel("edge-normal position [px]")
        ax1.set_ylabel("ESF")
        ax2.plot(edge.mtf_freq_cpp, edge.mtf)
        ax2.axhline(0.5, color="gray", lw=0.8)
        ax2.axvline(edge.mtf50, color="gray", lw=0.8)
        ax2.set_xlabel("frequency [cycles/px]")
        ax2.set_ylabel("MTF")
        fig.tight_layout()
        _save_figure(fig, f"{prefix}_edge.png")

    if not report.entries:
        raise ConfigurationError("no metric selected; pass --psnr/--mssim/--tc/--fd/--mtf")
    Path(f"{prefix}_report.txt").write_text(report.to_text_table())
    Path(f"{prefix}_report.kv").write_text(report.to_keyvalues())
    _write_run_log(_log_path(args, f"{prefix}_report"), "metrics", args)
    sys.stdout.write(report.to_text_table())


def _cmd_analyze_spectrum(args) -> None:
    grid = _parse_range(args.grid)
    req = analysis.SpectrumRequest(
        T_E_ms=args.T_E_ms, freq_grid_khz=grid, replica_range=args.replica_range
    )
    single = np.abs(analysis.phase_pixel_spectrum(req, 1))
    avg = np.abs(analysis.averaged_spectrum(req))
    closed = np.abs(analysis.averaged_spectrum_closed_form(req))
    with open(args.out, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["frequency_kHz", "single_phase_mag", "averaged_mag",
                         "closed_form_mag"])
        for row in zip(grid, single, avg, closed):
            writer.writerow([f"{v:.12g}" for v in row])
    fig, ax = plt.subplots(figsize=(6.5, 4))
    ax.plot(grid, single, label="single phase", lw=1)
    ax.plot(grid, avg, label="4-phase average", lw=1.5)
    ax.set_xlabel("frequency [kHz]")
    ax.set_ylabel("|Y(f)| / T_E")
    ax.legend()
    fig.tight_layout()
    _save_figure(fig, Path(args.out).with_suffix(".png"))
    _write_run_log(_log_path(args, args.out), "analyze-spectrum", args)


def _cmd_analyze_snr(args) -> None:
    model = TransientSignalModel(
        amplitude_A=args.A, baseline_B=args.B, tau_ms=args.tau_ms
    )
    curve = analysis.snr_curve(model, _parse_range(args.grid))
    analysis.write_snr_csv(args.out, curve)
    t_star, interior = analysis.optimal_exposure(
        model, float(curve.exposures_ms[0]), float(curve.exposures_ms[-1])
    )
    fig, ax = plt.subplots(figsize=(6.5, 4))
    ax.plot(curve.exposures_ms, curve.snr, lw=1.5)
    ax.axvline(curve.argmax_ms, color="gray", lw=0.8)
    ax.set_xlabel("exposure T_E [ms]")
    ax.set_ylabel("SNR")
    ax.set_title(f"argmax {curve.argmax_ms:.3g} ms ({'interior' if interior else 'boundary'})")
    fig.tight_layout()
    _save_figure(fig, Path(args.out).with_suffix(".png"))
    _write_run_log(_log_path(args, args.out), "analyze-snr", args)
    sys.stdout.write(
        f"argmax_ms={curve.argmax_ms:.9g}\noptimal_ms={t_star:.9g}\n"
        f"interior={interior}\n"
    )


def _cmd_analyze_psf(args) -> None:
    grid = _parse_range(args.grid)
    cols = {
        "short_2L": analysis.psf_spectrum(2, grid),
        "mid_4L": analysis.psf_spectrum(4, grid),
        "long_8L": analysis.psf_spectrum(8, grid),
        "averaged": analysis.averaged_psf_spectrum(grid),
    }
    with open(args.out, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["frequency_per_L"] + list(cols))
        for i, f in enumerate(grid):
            writer.writerow([f"{f:.12g}"] + [f"{v[i]:.12g}" for v in cols.values()])
    fig, ax = plt.subplots(figsize=(6.5, 4))
    for name, vals in cols.items():
        ax.plot(grid, vals, label=name, lw=1.2)
    ax.set_xlabel("spatial frequency [cycles per L]")
    ax.set_ylabel("|MTF|")
    ax.legend()
    fig.tight_layout()
    _save_figure(fig, Path(args.out).with_suffix(".png"))
    _write_run_log(_log_path(args, args.out), "analyze-psf", args)


def _cmd_make_dataset(args) -> None:
    videos = [load_vcube(p) for p in args.infile]
    crop = _parse_ints(args.crop_size, 3, "--crop-size")
    manifest = scenes.make_dataset(
        videos,
        pattern=_load_pattern(args),
        camera=_load_camera(args),
        seed=args.seed,
        out_dir=args.out_dir,
        crop_size=crop,
        augment=args.augment,
        normalize=not args.no_normalize,
        overwrite=args.overwrite,
    )
    _write_run_log(_log_path(args, Path(args.out_dir) / "run"), "make-dataset", args)
    sys.stdout.write(f"crops={len(manifest.records)}\n")


def _cmd_export_png(args) -> None:
    cube = load_vcube(args.infile)
    if args.tonemap:
        cube = mu_law_tonemap(cube, mu=args.mu)
    paths = export_png_frames(cube, args.out_dir, prefix=args.prefix)
    _write_run_log(_log_path(args, Path(args.out_dir) / args.prefix), "export-png", args)
    sys.stdout.write(f"frames={len(paths)}\n")


# ---------------------------------------------------------------------------
# Parser

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="phasepix",
        description="Pixel-wise programmable-exposure sensor simulation and "
                    "HDR video reconstruction toolkit.",
        epilog="Grid arguments use start:stop:step. The PHASEPIX_THREADS "
               "environment variable sets the default --threads value.",
    )
    parser.add_argument(
        "--threads", type=int,
        default=int(os.environ.get("PHASEPIX_THREADS", "0")) or None,
        help="cap worker threads (results are identical at any setting)",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)

    def common_io(p, infile=True, out=True):
        if infile:
            p.add_argument("--in", dest="infile", required=True, help="input .vcube")
        if out:
            p.add_argument("--out", required=True, help="output path")
        p.add_argument("--log", default=None, help="run log path (default <out>.log)")

    def common_model(p):
        p.add_argument("--pattern", default=None, help="pattern config file")
        p.add_argument("--camera", default=None, help="camera config file")

    p = sub.add_parser("gen-scene", help="render a synthetic ground-truth cube")
    p.add_argument("--kind", required=True, choices=scenes.SCENE_KINDS)
    p.add_argument("--rows", type=int, default=64)
    p.add_argument("--cols", type=int, default=64)
    p.add_argument("--ticks", type=int, default=32)
    p.add_argument("--tick-ms", type=float, default=1.0)
    p.add_argument("--param", action="append", metavar="KEY=VALUE",
                   help="scene parameter override (repeatable)")
    common_io(p, infile=False)
    p.set_defaults(func=_cmd_gen_scene)

    p = sub.add_parser("simulate", help="forward sensor model on an HDR cube")
    common_io(p)
    common_model(p)
    p.add_argument("--seed", type=int, default=None,
                   help="noise seed (omit for the noise-free model)")
    p.add_argument("--no-normalize", action="store_true",
                   help="input is already normalized to [0, 1]")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("reconstruct", help="classical HDR reconstruction")
    common_io(p)
    common_model(p)
    p.add_argument("--method", default="fused",
                   choices=("box", "fused", "short", "mid", "long"))
    p.add_argument("--tonemap", action="store_true",
                   help="apply log range compression to the output")
    p.add_argument("--mu", type=float, default=5000.0)
    p.set_defaults(func=_cmd_reconstruct)

    p = sub.add_parser("metrics", help="score a cube; writes report, CSVs, figures")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--ref", default=None, help="reference .vcube for psnr/mssim")
    p.add_argument("--out-prefix", required=True,
                   help="output path prefix for report/CSV/PNG files")
    p.add_argument("--log", default=None)
    p.add_argument("--psnr", action="store_true")
    p.add_argument("--mssim", action="store_true")
    p.add_argument("--peak", type=float, default=1.0)
    p.add_argument("--tc", action="store_true", help="temporal contrast")
    p.add_argument("--fd", action="store_true", help="event full duration")
    p.add_argument("--pixel", default=None, metavar="ROW:COL")
    p.add_argument("--window", default=None, metavar="START:STOP",
                   help="tick window for --tc/--fd")
    p.add_argument("--frac", type=float, default=0.15,
                   help="threshold fraction for --fd")
    p.add_argument("--mtf", action="store_true", help="slanted-edge analysis")
    p.add_argument("--frame", type=int, default=0, help="tick for --mtf")
    p.add_argument("--roi", default=None, metavar="R0:R1:C0:C1")
    p.set_defaults(func=_cmd_metrics)

    p = sub.add_parser("analyze-spectrum", help="multi-phase sampling spectra")
    p.add_argument("--T-E-ms", dest="T_E_ms", type=float, required=True)
    p.add_argument("--grid", required=True, help="frequency grid in kHz")
    p.add_argument("--replica-range", type=int, default=analysis.DEFAULT_REPLICA_RANGE)
    common_io(p, infile=False)
    p.set_defaults(func=_cmd_analyze_spectrum)

    p = sub.add_parser("analyze-snr", help="SNR vs exposure for a transient")
    p.add_argument("--A", type=float, required=True, help="pulse amplitude")
    p.add_argument("--B", type=float, required=True, help="baseline level")
    p.add_argument("--tau-ms", dest="tau_ms", type=float, required=True)
    p.add_argument("--grid", required=True, help="exposure grid in ms")
    common_io(p, infile=False)
    p.set_defaults(func=_cmd_analyze_snr)

    p = sub.add_parser("analyze-psf", help="motion-blur MTFs of the exposure classes")
    p.add_argument("--grid", default="0:1:0.005", help="frequency grid in cycles per L")
    common_io(p, infile=False)
    p.set_defaults(func=_cmd_analyze_psf)

    p = sub.add_parser("make-dataset", help="render training crops and a manifest")
    p.add_argument("--in", dest="infile", action="append", required=True,
                   help="source .vcube (repeatable)")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--log", default=None)
    common_model(p)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--crop-size", default="128:128:8", metavar="R:C:T")
    p.add_argument("--augment", action="store_true")
    p.add_argument("--no-normalize", action="store_true")
    p.add_argument("--overwrite", action="store_true")
    p.set_defaults(func=_cmd_make_dataset)

    p = sub.add_parser("export-png", help="write each tick as an 8-bit PNG")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--log", default=None)
    p.add_argument("--prefix", default="frame")
    p.add_argument("--tonemap", action="store_true")
    p.add_argument("--mu", type=float, default=5000.0)
    p.set_defaults(func=_cmd_export_png)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.func(args)
    except (ValidationError, ConfigurationError, FormatError, FileExistsError,
            OSError) as exc:
        print(f"error: {args.subcommand}: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
