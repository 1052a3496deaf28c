"""Classical reconstruction from pixel-wise measurements to HDR video.

Two paths are provided: a per-frame spatial box-filter baseline, and a
phase-aware path that interpolates each exposure class to the full
(row, col, tick) grid and fuses the three resulting LDR videos with
deterministic well-exposedness weights.  Both return irradiance cubes at
the medium-exposure scale (x4 relative to the normalized ground truth).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .core import CameraModel, SamplingPattern, ValidationError, VideoCube

FUSION_EPSILON = 1e-4  # weight floor keeping the fusion denominator positive
MEDIUM_GAIN = 4        # the reference exposure scale


@dataclass(frozen=True)
class LdrStack:
    """Three full-grid LDR videos at the low/mid/high exposure gains.

    ``sat_influence`` optionally carries one boolean array per cube marking
    samples whose interpolation drew on a saturated native measurement;
    fusion treats those as clipped even when the interpolated value itself
    sits below the saturation code.
    """

    low: VideoCube
    mid: VideoCube
    high: VideoCube
    exposure_gains: tuple = (2, 4, 8)
    flags: tuple = field(default=())
    sat_influence: tuple = field(default=None)

    def __post_init__(self):
        dims = {c.data.shape for c in (self.low, self.mid, self.high)}
        if len(dims) != 1:
            raise ValidationError(f"LDR stack dims differ: {dims}")
        for cube in (self.low, self.mid, self.high):
            if cube.data.min() < 0 or cube.data.max() > 1:
                raise ValidationError("LDR stack values must lie in [0, 1]")

    def cubes(self):
        return (self.low, self.mid, self.high)


_CLASS_TO_SLOT = {"short": "low", "mid": "mid", "long": "high"}


def _pixel_gain_map(pattern: SamplingPattern, rows: int, cols: int) -> np.ndarray:
    gain = np.zeros((rows, cols))
    for i, (cls, _) in enumerate(pattern.tile):
        gain[i // 2::2, i % 2::2] = cls.gain_label
    return gain


def box_filter_reconstruct(
    y_mea: VideoCube, pattern: SamplingPattern, camera: CameraModel
) -> VideoCube:
    """Per-frame spatial aggregation baseline.

    Each pixel is mapped to irradiance through the inverse response and its
    class gain, saturated pixels are dropped, and every pixel is replaced
    by the mean of the valid pixels in its 3x3 neighborhood.  Frames are
    processed independently.
    """
    gain = _pixel_gain_map(pattern, y_mea.rows, y_mea.cols)
    irr = camera.inverse_response(y_mea.data) * (MEDIUM_GAIN / gain)[:, :, None]
    valid = y_mea.data < camera.saturation_code

    kernel = np.ones((3, 3, 1))
    sums = ndimage.convolve(np.where(valid, irr, 0.0), kernel, mode="constant")
    counts = ndimage.convolve(valid.astype(np.float64), kernel, mode="constant")
    out = np.divide(sums, counts, out=np.zeros_like(sums), where=counts > 0)

    holes = counts == 0
    if holes.any():
        # unrecoverable pixels take the nearest recovered value in-frame
        for t in range(y_mea.ticks):
            h = holes[:, :, t]
            if not h.any():
                continue
            if h.all():
                continue  # whole frame saturated; leave zeros
            _, (ir, ic) = ndimage.distance_transform_edt(h, return_indices=True)
            out[:, :, t] = out[ir, ic, t]
    return y_mea.with_data(out)


def _interp_time(values: np.ndarray, anchors: np.ndarray, ticks: int) -> np.ndarray:
    """Linear interpolation of (npix_r, npix_c, K) samples at integer anchor
    ticks onto the full tick axis, holding beyond the first/last anchor."""
    t = np.arange(ticks, dtype=float)
    ri = np.clip(np.searchsorted(anchors, t, side="right"), 1, len(anchors) - 1) \
        if len(anchors) > 1 else np.zeros(ticks, dtype=int)
    if len(anchors) == 1:
        return np.repeat(values, ticks, axis=2)
    li = ri - 1
    span = (anchors[ri] - anchors[li]).astype(float)
    w = np.clip((t - anchors[li]) / span, 0.0, 1.0)
    return values[:, :, li] * (1.0 - w) + values[:, :, ri] * w


def _interp_space(sub: np.ndarray, r0: int, c0: int, rows: int, cols: int) -> np.ndarray:
    """Separable bilinear interpolation from the (r0::2, c0::2) subgrid to
    the full grid, clamped at the borders."""
    src_r = r0 + 2.0 * np.arange(sub.shape[0])
    src_c = c0 + 2.0 * np.arange(sub.shape[1])
    tr = np.clip(np.arange(rows, dtype=float), src_r[0], src_r[-1])
    tc = np.clip(np.arange(cols, dtype=float), src_c[0], src_c[-1])

    def axis_weights(src, tgt):
        ri = np.clip(np.searchsorted(src, tgt, side="right"), 1, len(src) - 1)
        li = ri - 1
        w = (tgt - src[li]) / (src[ri] - src[li])
        return li, ri, w

    if sub.shape[0] == 1:
        along_r = np.repeat(sub, rows, axis=0)
    else:
        li, ri, w = axis_weights(src_r, tr)
        along_r = sub[li] * (1.0 - w)[:, None, None] + sub[ri] * w[:, None, None]
    if sub.shape[1] == 1:
        return np.repeat(along_r, cols, axis=1)
    li, ri, w = axis_weights(src_c, tc)
    return along_r[:, li] * (1.0 - w)[None, :, None] + along_r[:, ri] * w[None, :, None]


def interpolate_class(y_mea: VideoCube, pattern: SamplingPattern, name: str):
    """Full-grid estimate of one exposure class's LDR video.

    Native samples are anchored at window ends (a window's integral is
    complete only then); temporal interpolation runs between consecutive
    window-end samples, then the class subgrid is expanded bilinearly.
    Classes occupying two tile positions are averaged over both estimates.

    Returns (cube, flags).
    """
    positions = pattern.class_positions(name)
    if not positions:
        raise ValidationError(f"pattern has no {name!r} pixels")
    rows, cols, ticks = y_mea.rows, y_mea.cols, y_mea.ticks
    flags = []
    estimates = []
    for (r0, c0) in positions:
        cls, phase = pattern.entry(r0, c0)
        d = cls.duration_ticks
        n_complete = max((ticks - phase) // d, 0)
        if n_complete == 0:
            raise ValidationError(
                f"no complete window for class {name!r} at phase {phase}"
            )
        anchors = phase + d * np.arange(1, n_complete + 1) - 1
        sub = y_mea.data[r0::2, c0::2, :][:, :, anchors]
        if n_complete < 2:
            flags.append(f"{name}@({r0},{c0}):hold-extrapolated")
        filled = _interp_time(sub, anchors, ticks)
        estimates.append(_interp_space(filled, r0, c0, rows, cols))
    out = np.clip(np.mean(estimates, axis=0), 0.0, 1.0)
    return y_mea.with_data(out), tuple(flags)


def interpolate_ldr(
    y_mea: VideoCube, pattern: SamplingPattern, camera: CameraModel = None
) -> LdrStack:
    """Classical stand-in for learned spatiotemporal upsampling.

    When a camera model is supplied, the saturation indicator of the native
    samples is pushed through the same interpolation operators, yielding a
    per-class mask of outputs influenced by clipped measurements.
    """
    cubes = {}
    flags = []
    influence = {}
    sat_cube = None
    if camera is not None:
        sat_cube = y_mea.with_data(
            (y_mea.data >= camera.saturation_code).astype(np.float64)
        )
    for name in ("short", "mid", "long"):
        cube, fl = interpolate_class(y_mea, pattern, name)
        cubes[_CLASS_TO_SLOT[name]] = cube
        flags.extend(fl)
        if sat_cube is not None:
            spread, _ = interpolate_class(sat_cube, pattern, name)
            influence[_CLASS_TO_SLOT[name]] = spread.data > 1e-9
    return LdrStack(
        low=cubes["low"], mid=cubes["mid"], high=cubes["high"], flags=tuple(flags),
        sat_influence=(
            (influence["low"], influence["mid"], influence["high"])
            if sat_cube is not None else None
        ),
    )


def triangle_weights(y: np.ndarray) -> np.ndarray:
    """Well-exposedness weight: peaks at mid-scale codes, floored at
    FUSION_EPSILON so the fusion denominator stays positive."""
    return np.maximum(FUSION_EPSILON, 1.0 - np.abs(2.0 * y - 1.0))


def fuse_hdr(stack: LdrStack, camera: CameraModel, uniform_weights: bool = False) -> VideoCube:
    """Weighted fusion of the gain-aligned LDR stack.

    Each class is mapped to irradiance and aligned to the medium-exposure
    scale (x 4/gain); the fused cube is the weight-normalized sum, a convex
    combination of the per-class estimates.  Saturated inputs carry no
    information about the true irradiance, so their weight is zero whenever
    any class is unsaturated; if all three are saturated the epsilon floor
    takes over so the output stays a defined convex combination.
    ``uniform_weights`` is a test hook reducing the fusion to the
    arithmetic mean.
    """
    estimates = []
    weights = []
    for i, (cube, gain) in enumerate(zip(stack.cubes(), stack.exposure_gains)):
        estimates.append(camera.inverse_response(cube.data) * (MEDIUM_GAIN / gain))
        if uniform_weights:
            weights.append(np.ones_like(estimates[-1]))
        else:
            w = triangle_weights(cube.data)
            clipped = cube.data >= camera.saturation_code
            if stack.sat_influence is not None:
                clipped = clipped | stack.sat_influence[i]
            weights.append(np.where(clipped, 0.0, w))
    den = sum(weights)
    if not uniform_weights:
        all_sat = den == 0.0
        if all_sat.any():
            weights = [np.where(all_sat, FUSION_EPSILON, w) for w in weights]
            den = sum(weights)
    num = sum(w * p_i for w, p_i in zip(weights, estimates))
    return stack.mid.with_data(num / den)


def single_class_reconstruct(
    y_mea: VideoCube, pattern: SamplingPattern, camera: CameraModel, name: str
) -> VideoCube:
    """Irradiance from one exposure class only, at medium scale.

    The comparison arm for dynamic-range and deblurring checks: what a
    camera running everywhere at this class's exposure would deliver.
    """
    cube, _ = interpolate_class(y_mea, pattern, name)
    gain = dict(zip(("short", "mid", "long"), (2, 4, 8)))[name]
    return cube.with_data(camera.inverse_response(cube.data) * (MEDIUM_GAIN / gain))


def mu_law_tonemap(p_hat: VideoCube, mu: float = 5000.0) -> VideoCube:
    """Logarithmic range compression l = log(1 + mu*p) / log(1 + mu)."""
    if mu <= 0:
        raise ValidationError("mu must be positive")
    if p_hat.data.min() < 0:
        raise ValidationError("tone-map input must be non-negative")
    return p_hat.with_data(np.log1p(mu * p_hat.data) / np.log1p(mu))


def reconstruct(
    y_mea: VideoCube,
    pattern: SamplingPattern,
    camera: CameraModel,
    method: str = "fused",
) -> VideoCube:
    """Dispatch to a reconstruction path by name."""
    if method == "box":
        return box_filter_reconstruct(y_mea, pattern, camera)
    if method == "fused":
        return fuse_hdr(interpolate_ldr(y_mea, pattern, camera), camera)
    if method in ("short", "mid", "long"):
        return single_class_reconstruct(y_mea, pattern, camera, method)
    raise ValidationError(
        f"unknown method {method!r}; expected box, fused, short, mid or long"
    )


def export_png_frames(cube: VideoCube, out_dir, prefix: str = "frame") -> list:
    """Write each tick as an 8-bit grayscale PNG (value = round(255*l))."""
    from pathlib import Path

    from PIL import Image

    data = cube.data
    if data.min() < 0 or data.max() > 1:
        raise ValidationError("PNG export expects tone-mapped values in [0, 1]")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for t in range(cube.ticks):
        img = np.floor(255.0 * data[:, :, t] + 0.5).astype(np.uint8)
        path = out / f"{prefix}_{t:05d}.png"
        Image.fromarray(img, mode="L").save(path)
        paths.append(path)
    return paths
