"""3D convolutional networks for exposure-stack synthesis and fusion.

Two models operate on hold-upsampled sensor measurements shaped
(batch, channels, ticks, rows, cols):

* the synthesis net turns the single-channel measurement into the three
  low/mid/high exposure renderings (a 3D U-net: strided encoder, deep
  residual bottleneck, transposed-conv decoder with skip connections,
  sigmoid output), and
* the fusion net scores the per-exposure irradiance estimates with three
  positive weight cubes used in a normalized weighted average.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch
from torch import nn


class ShapeError(ValueError):
    """Input dimensions are incompatible with the network."""


DOWNSAMPLE_FACTOR = 8  # three stride-2 stages


@dataclass(frozen=True)
class LdrNetConfig:
    """Synthesis-network hyperparameters.

    ``width`` is the channel count of the first encoder stage; deeper
    stages double it twice.  Kernel sizes are fixed by the architecture:
    7x7x7 in the first block, 3x3x3 elsewhere, 4x4x4 for the transposed
    convolutions.
    """

    width: int = 16
    bottleneck_blocks: int = 12
    negative_slope: float = 0.2
    in_channels: int = 1
    out_channels: int = 3

    def __post_init__(self):
        if self.width < 1 or self.bottleneck_blocks < 1:
            raise ValueError("width and bottleneck_blocks must be positive")
        if self.negative_slope <= 0:
            raise ValueError("negative_slope must be positive")
        if self.in_channels < 1 or self.out_channels < 1:
            raise ValueError("channel counts must be positive")


@dataclass(frozen=True)
class HdrNetConfig:
    """Fusion-network hyperparameters (five 3x3x3 residual modules)."""

    width: int = 16
    residual_modules: int = 5
    negative_slope: float = 0.2
    in_channels: int = 6
    out_channels: int = 3

    def __post_init__(self):
        if self.width < 1 or self.residual_modules < 1:
            raise ValueError("width and residual_modules must be positive")
        if self.negative_slope <= 0:
            raise ValueError("negative_slope must be positive")
        if self.in_channels < 1 or self.out_channels < 1:
            raise ValueError("channel counts must be positive")


def _conv_act_norm(cin, cout, kernel, stride, slope):
    return nn.Sequential(
        nn.Conv3d(cin, cout, kernel, stride=stride, padding=kernel // 2),
        nn.LeakyReLU(slope),
        nn.BatchNorm3d(cout),
    )


class _ResidualBlock(nn.Module):
    """Two 3x3x3 convolutions with activation and normalization inside
    the residual branch; the skip spans the whole block."""

    def __init__(self, channels, slope):
        super().__init__()
        self.conv1 = nn.Conv3d(channels, channels, 3, padding=1)
        self.mid = nn.Sequential(nn.LeakyReLU(slope), nn.BatchNorm3d(channels))
        self.conv2 = nn.Conv3d(channels, channels, 3, padding=1)

    def forward(self, x):
        return x + self.conv2(self.mid(self.conv1(x)))


class LdrNet(nn.Module):
    """Measurement -> three-exposure stack, a 3D U-net.

    Encoder: a stride-2 7x7x7 block, then two stages of paired 3x3x3
    convolutions whose second conv has stride 2.  Bottleneck: a chain of
    residual blocks at the deepest width.  Decoder: three stages of
    4x4x4 transposed convolution (stride 2, padding 1) followed by a
    3x3x3 convolution; skip connections concatenate the matching encoder
    activation (and the raw input at full resolution).  A sigmoid keeps
    the output inside [0, 1].
    """

    def __init__(self, cfg: LdrNetConfig):
        super().__init__()
        self.cfg = cfg
        w, s = cfg.width, cfg.negative_slope
        self.enc1 = _conv_act_norm(cfg.in_channels, w, 7, 2, s)
        self.enc2 = nn.Sequential(
            _conv_act_norm(w, 2 * w, 3, 1, s),
            _conv_act_norm(2 * w, 2 * w, 3, 2, s),
        )
        self.enc3 = nn.Sequential(
            _conv_act_norm(2 * w, 4 * w, 3, 1, s),
            _conv_act_norm(4 * w, 4 * w, 3, 2, s),
        )
        self.bottleneck = nn.Sequential(
            *[_ResidualBlock(4 * w, s) for _ in range(cfg.bottleneck_blocks)]
        )
        self.up1 = nn.ConvTranspose3d(4 * w, 2 * w, 4, stride=2, padding=1)
        self.dec1 = _conv_act_norm(4 * w, 2 * w, 3, 1, s)
        self.up2 = nn.ConvTranspose3d(2 * w, w, 4, stride=2, padding=1)
        self.dec2 = _conv_act_norm(2 * w, w, 3, 1, s)
        self.up3 = nn.ConvTranspose3d(w, w, 4, stride=2, padding=1)
        self.head = nn.Conv3d(w + cfg.in_channels, cfg.out_channels, 3, padding=1)

    def forward(self, x):
        if x.ndim != 5:
            raise ShapeError(f"expected (batch, channel, ticks, rows, cols), got {tuple(x.shape)}")
        if x.shape[1] != self.cfg.in_channels:
            raise ShapeError(
                f"expected {self.cfg.in_channels} input channel(s), got {x.shape[1]}"
            )
        bad = [d for d in x.shape[2:] if d % DOWNSAMPLE_FACTOR != 0]
        if bad:
            raise ShapeError(
                f"dims {tuple(x.shape[2:])} are not divisible by {DOWNSAMPLE_FACTOR} "
                f"as required by the three stride-2 stages; pad the cube to the "
                f"next multiple of {DOWNSAMPLE_FACTOR}"
            )
        e1 = self.enc1(x)
        e2 = self.enc2(e1)
        e3 = self.enc3(e2)
        b = self.bottleneck(e3)
        d = self.dec1(torch.cat([self.up1(b), e2], dim=1))
        d = self.dec2(torch.cat([self.up2(d), e1], dim=1))
        return torch.sigmoid(self.head(torch.cat([self.up3(d), x], dim=1)))


class HdrNet(nn.Module):
    """Exposure stack + irradiance estimates -> positive fusion weights.

    Consumes the 6-channel concatenation of the predicted exposure stack
    and its per-exposure irradiance estimates; a softplus plus a small
    epsilon keeps all three weight channels strictly positive so the
    fusion denominator never vanishes.
    """

    WEIGHT_EPSILON = 1e-6

    def __init__(self, cfg: HdrNetConfig):
        super().__init__()
        self.cfg = cfg
        w, s = cfg.width, cfg.negative_slope
        self.stem = nn.Conv3d(cfg.in_channels, w, 3, padding=1)
        self.blocks = nn.Sequential(
            *[_ResidualBlock(w, s) for _ in range(cfg.residual_modules)]
        )
        self.head = nn.Conv3d(w, cfg.out_channels, 3, padding=1)

    def forward(self, x):
        if x.ndim != 5:
            raise ShapeError(f"expected (batch, channel, ticks, rows, cols), got {tuple(x.shape)}")
        if x.shape[1] != self.cfg.in_channels:
            raise ShapeError(
                f"expected {self.cfg.in_channels} input channels, got {x.shape[1]}"
            )
        out = self.head(self.blocks(self.stem(x)))
        return nn.functional.softplus(out) + self.WEIGHT_EPSILON


def build_ldr_net(cfg: LdrNetConfig, seed: int = 0) -> LdrNet:
    """Construct a synthesis net with seed-determined initial weights."""
    with torch.random.fork_rng():
        torch.manual_seed(seed)
        return LdrNet(cfg)


def build_hdr_net(cfg: HdrNetConfig, seed: int = 0) -> HdrNet:
    """Construct a fusion net with seed-determined initial weights."""
    with torch.random.fork_rng():
        torch.manual_seed(seed)
        return HdrNet(cfg)


# Exposure gains of the low/mid/high stack relative to the medium
# reference: estimates are aligned to the medium scale by 4/gain.
EXPOSURE_GAINS = (2.0, 4.0, 8.0)


def irradiance_estimates(y_hat: torch.Tensor, gamma: float) -> torch.Tensor:
    """Per-exposure irradiance at the medium-reference scale.

    Applies the inverse camera response (a pure power law here) to each
    predicted exposure channel, then divides by the relative exposure so
    all three channels estimate the same quantity where unsaturated.
    """
    if y_hat.ndim != 5 or y_hat.shape[1] != len(EXPOSURE_GAINS):
        raise ShapeError(
            f"expected (batch, {len(EXPOSURE_GAINS)}, ticks, rows, cols), "
            f"got {tuple(y_hat.shape)}"
        )
    align = torch.tensor([4.0 / g for g in EXPOSURE_GAINS],
                         dtype=y_hat.dtype, device=y_hat.device)
    return (y_hat.clamp(min=0) ** gamma) * align.view(1, -1, 1, 1, 1)


def fuse_exposures(p_hat: torch.Tensor, weights: torch.Tensor) -> torch.Tensor:
    """Normalized weighted average over the exposure axis (dim 1).

    With positive weights the result is a pointwise convex combination,
    so it lies inside [min_i p_hat_i, max_i p_hat_i].
    """
    if p_hat.shape != weights.shape:
        raise ShapeError(
            f"estimates {tuple(p_hat.shape)} and weights {tuple(weights.shape)} differ"
        )
    num = (weights * p_hat).sum(dim=1, keepdim=True)
    den = weights.sum(dim=1, keepdim=True)
    return num / den
