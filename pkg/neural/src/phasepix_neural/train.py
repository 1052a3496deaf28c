"""Two-stage training: exposure-stack synthesis, then fusion weighting.

Stage one fits the synthesis net so that each predicted exposure channel
matches its rendered target; the per-channel losses are summed.  Stage
two freezes the synthesis net, converts its outputs to irradiance
estimates through the inverse camera response, learns fusion weights,
and scores the fused result against the tone-mapped medium-exposure
reference.

Checkpoints are self-describing (config, seed, step, optimizer and RNG
state), so training resumes deterministically; loss curves are written
as CSV next to the checkpoint.
"""

from __future__ import annotations

import csv
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
import torch

from .io import CropDataset
from .losses import (
    MU_DEFAULT,
    PERCEPTUAL_LAYER,
    SSIM_C1,
    SSIM_C2,
    SSIM_WINDOW,
    ReconstructionLoss,
)
from .models import (
    HdrNet,
    HdrNetConfig,
    LdrNet,
    LdrNetConfig,
    build_hdr_net,
    build_ldr_net,
    fuse_exposures,
    irradiance_estimates,
)

CHECKPOINT_VERSION = 1


class CheckpointError(ValueError):
    """A checkpoint file is missing or inconsistent."""


@dataclass(frozen=True)
class TrainConfig:
    """Optimization and loss hyperparameters shared by both stages."""

    steps: int = 200
    learning_rate: float = 1e-3
    batch_size: int = 1
    seed: int = 0
    width: int = 16
    negative_slope: float = 0.2
    gamma: float = 2.2           # inverse-response exponent for irradiance
    mu: float = MU_DEFAULT
    perceptual_layer: int = PERCEPTUAL_LAYER
    ssim_window: int = SSIM_WINDOW
    ssim_c1: float = SSIM_C1
    ssim_c2: float = SSIM_C2
    loss_weights: tuple = (1.0, 1.0, 1.0)
    final_lr_fraction: float = 0.05   # cosine decay floor relative to learning_rate

    def __post_init__(self):
        if self.steps < 1 or self.batch_size < 1 or self.width < 1:
            raise ValueError("steps, batch_size and width must be positive")
        if self.learning_rate <= 0 or self.gamma <= 0 or self.mu <= 0:
            raise ValueError("learning_rate, gamma and mu must be positive")
        if not 0 < self.final_lr_fraction <= 1:
            raise ValueError("final_lr_fraction must be in (0, 1]")
        if len(self.loss_weights) != 3 or min(self.loss_weights) < 0:
            raise ValueError("loss_weights needs three non-negative entries")


def _make_loss(cfg: TrainConfig, mode: str) -> ReconstructionLoss:
    return ReconstructionLoss(
        mode=mode, mu=cfg.mu, term_weights=cfg.loss_weights,
        window=cfg.ssim_window, c1=cfg.ssim_c1, c2=cfg.ssim_c2,
        perceptual_layer=cfg.perceptual_layer,
    )


def _write_curve(path, rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["step", "total", "mse", "perceptual", "ssim"])
        writer.writerows(rows)


def _batch(dataset: CropDataset, indices, key: str) -> torch.Tensor:
    arrays = [dataset.load(int(i))[key] for i in indices]
    batch = torch.from_numpy(np.stack(arrays)).to(torch.float32)
    if batch.ndim == 4:          # (B, T, H, W) -> single channel
        batch = batch[:, None]
    return batch


def _save_checkpoint(path, kind, model, optimizer, scheduler, cfg, step,
                     generator) -> None:
    torch.save({
        "version": CHECKPOINT_VERSION,
        "kind": kind,
        "config": asdict(cfg),
        "seed": cfg.seed,
        "step": step,
        "model_state": model.state_dict(),
        "optimizer_state": optimizer.state_dict(),
        "scheduler_state": scheduler.state_dict(),
        "sampler_state": generator.get_state(),
    }, path)


def load_checkpoint(path, expected_kind: str) -> dict:
    try:
        state = torch.load(path, map_location="cpu", weights_only=False)
    except FileNotFoundError as exc:
        raise CheckpointError(f"checkpoint {path} not found") from exc
    if not isinstance(state, dict) or state.get("kind") != expected_kind:
        raise CheckpointError(
            f"{path} is not a {expected_kind!r} checkpoint"
        )
    return state


def _model_from_checkpoint(state: dict):
    cfg = TrainConfig(**{k: tuple(v) if isinstance(v, list) else v
                         for k, v in state["config"].items()})
    if state["kind"] == "ldr":
        model = LdrNet(LdrNetConfig(width=cfg.width, negative_slope=cfg.negative_slope))
    else:
        model = HdrNet(HdrNetConfig(width=cfg.width, negative_slope=cfg.negative_slope))
    model.load_state_dict(state["model_state"])
    return model, cfg


def load_ldr_model(path) -> tuple:
    """Rebuild a trained synthesis net (eval mode) and its config."""
    model, cfg = _model_from_checkpoint(load_checkpoint(path, "ldr"))
    model.eval()
    return model, cfg


def load_hdr_model(path) -> tuple:
    """Rebuild a trained fusion net (eval mode) and its config."""
    model, cfg = _model_from_checkpoint(load_checkpoint(path, "hdr"))
    model.eval()
    return model, cfg


def _run_stage(dataset, cfg, out_dir, kind, model, step_fn, resume,
               stop_step=None) -> Path:
    """Shared optimization loop: sampling, logging, checkpointing.

    ``stop_step`` checkpoints early while keeping the schedule defined
    by ``cfg.steps``, so a stopped-and-resumed run retraces the
    uninterrupted one.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    optimizer = torch.optim.Adam(model.parameters(), lr=cfg.learning_rate)
    scheduler = torch.optim.lr_scheduler.CosineAnnealingLR(
        optimizer, T_max=cfg.steps,
        eta_min=cfg.learning_rate * cfg.final_lr_fraction,
    )
    generator = torch.Generator().manual_seed(cfg.seed)
    start = 0
    if resume is not None:
        state = load_checkpoint(resume, kind)
        model.load_state_dict(state["model_state"])
        optimizer.load_state_dict(state["optimizer_state"])
        scheduler.load_state_dict(state["scheduler_state"])
        generator.set_state(state["sampler_state"])
        start = state["step"]

    end = cfg.steps if stop_step is None else min(stop_step, cfg.steps)
    rows = []
    for step in range(start, end):
        indices = torch.randint(len(dataset), (cfg.batch_size,), generator=generator)
        total, parts = step_fn(indices)
        optimizer.zero_grad()
        total.backward()
        optimizer.step()
        scheduler.step()
        rows.append([step, float(total.detach()), parts["mse"],
                     parts["perceptual"], parts["ssim"]])

    curve_path = out / f"{kind}_loss.csv"
    if resume is not None and curve_path.exists():
        with open(curve_path, newline="") as fh:
            prior = [r for r in csv.reader(fh)][1:]
        rows = [r for r in prior if int(r[0]) < start] + rows
    _write_curve(curve_path, rows)
    ckpt_path = out / f"{kind}_net.pt"
    _save_checkpoint(ckpt_path, kind, model, optimizer, scheduler, cfg,
                     end, generator)
    return ckpt_path


def train_ldr(manifest_path, cfg: TrainConfig, out_dir, resume=None,
              stop_step=None) -> Path:
    """Fit the synthesis net on a dataset manifest; returns the checkpoint path.

    The loss is the sum over the three exposure channels of the full
    reconstruction loss between the predicted and rendered channel.
    """
    dataset = CropDataset(manifest_path)
    model = build_ldr_net(
        LdrNetConfig(width=cfg.width, negative_slope=cfg.negative_slope),
        seed=cfg.seed,
    )
    model.train()
    loss_fn = _make_loss(cfg, "ldr")

    def step_fn(indices):
        y_mea = _batch(dataset, indices, "y_mea")
        targets = _batch(dataset, indices, "targets")
        pred = model(y_mea)
        total = pred.new_zeros(())
        sums = {"mse": 0.0, "perceptual": 0.0, "ssim": 0.0}
        for i in range(pred.shape[1]):
            term, parts = loss_fn(pred[:, i:i + 1], targets[:, i:i + 1])
            total = total + term
            for key in sums:
                sums[key] += parts[key]
        return total, sums

    return _run_stage(dataset, cfg, out_dir, "ldr", model, step_fn, resume,
                      stop_step=stop_step)


def train_hdr(manifest_path, ldr_checkpoint, cfg: TrainConfig, out_dir,
              resume=None, stop_step=None) -> Path:
    """Fit the fusion net with a frozen synthesis net; returns the checkpoint.

    Irradiance estimates come from the inverse camera response applied to
    each predicted exposure channel; the fused estimate is scored against
    the tone-mapped medium-exposure reference.
    """
    dataset = CropDataset(manifest_path)
    ldr_model, _ = load_ldr_model(ldr_checkpoint)
    for param in ldr_model.parameters():
        param.requires_grad_(False)
    model = build_hdr_net(
        HdrNetConfig(width=cfg.width, negative_slope=cfg.negative_slope),
        seed=cfg.seed,
    )
    model.train()
    loss_fn = _make_loss(cfg, "hdr_tonemapped")

    def step_fn(indices):
        y_mea = _batch(dataset, indices, "y_mea")
        p = _batch(dataset, indices, "p")
        with torch.no_grad():
            y_hat = ldr_model(y_mea)
        p_hat = irradiance_estimates(y_hat, cfg.gamma)
        weights = model(torch.cat([y_hat, p_hat], dim=1))
        fused = fuse_exposures(p_hat, weights)
        return loss_fn(fused, p)

    return _run_stage(dataset, cfg, out_dir, "hdr", model, step_fn, resume,
                      stop_step=stop_step)
