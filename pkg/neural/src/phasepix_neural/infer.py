"""Inference: measurement cube file -> fused HDR cube file.

Runs the frozen synthesis net on a hold-upsampled measurement, converts
the predicted exposure stack to irradiance estimates via the inverse
camera response, weights them with the fusion net, and writes the
normalized weighted average.  Both networks run in eval mode, so batch
normalization uses the statistics frozen at training time.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch

from .io import Cube, LDR_SLOTS, load_vcube, save_vcube
from .models import fuse_exposures, irradiance_estimates
from .train import load_hdr_model, load_ldr_model


@dataclass(frozen=True)
class InferenceResult:
    """Arrays and file paths produced by one inference run.

    ``fused`` and the entries of ``ldr_stack``/``irradiance`` are
    (ticks, rows, cols) float arrays; ``weights`` is (3, T, H, W).
    """

    fused: np.ndarray
    ldr_stack: np.ndarray
    irradiance: np.ndarray
    weights: np.ndarray
    tick_ms: float
    output_path: Path
    ldr_paths: tuple


def run_inference(input_path, ldr_checkpoint, hdr_checkpoint, output_path,
                  ldr_stack_dir=None) -> InferenceResult:
    """Fuse one measurement cube; returns arrays plus written paths.

    When ``ldr_stack_dir`` is given the three predicted exposure
    renderings are written there as ``<stem>_y_low/mid/high.vcube``.
    """
    cube = load_vcube(input_path)
    ldr_model, ldr_cfg = load_ldr_model(ldr_checkpoint)
    hdr_model, _ = load_hdr_model(hdr_checkpoint)

    x = torch.from_numpy(cube.as_tchw()).to(torch.float32)[None, None]
    with torch.no_grad():
        y_hat = ldr_model(x)
        p_hat = irradiance_estimates(y_hat, ldr_cfg.gamma)
        weights = hdr_model(torch.cat([y_hat, p_hat], dim=1))
        fused = fuse_exposures(p_hat, weights)

    fused_tchw = fused[0, 0].numpy()
    out = Path(output_path)
    save_vcube(Cube.from_tchw(fused_tchw, cube.tick_ms), out)

    ldr_paths = ()
    if ldr_stack_dir is not None:
        stack_dir = Path(ldr_stack_dir)
        stack_dir.mkdir(parents=True, exist_ok=True)
        stem = Path(input_path).stem
        paths = []
        for i, slot in enumerate(LDR_SLOTS):
            path = stack_dir / f"{stem}_{slot}.vcube"
            save_vcube(Cube.from_tchw(y_hat[0, i].numpy(), cube.tick_ms), path)
            paths.append(path)
        ldr_paths = tuple(paths)

    return InferenceResult(
        fused=fused_tchw,
        ldr_stack=y_hat[0].numpy(),
        irradiance=p_hat[0].numpy(),
        weights=weights[0].numpy(),
        tick_ms=cube.tick_ms,
        output_path=out,
        ldr_paths=ldr_paths,
    )
