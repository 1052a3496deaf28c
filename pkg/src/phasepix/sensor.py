"""Forward sensor model: irradiance cube -> pixel-wise measurements.

The pipeline mirrors a pixel-wise programmable-exposure camera: normalize
the HDR input, integrate each pixel over its own back-to-back exposure
windows, add shot + read noise, apply the response curve, quantize, and
hold-upsample so the measurement cube has the same dimensions as the input.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import (
    CameraModel,
    ConfigurationError,
    SamplingPattern,
    ValidationError,
    VideoCube,
)

# ---------------------------------------------------------------------------
# Exposure cube

@dataclass(frozen=True)
class ExposureCube:
    """Per-pixel integration windows over a (rows, cols, ticks) grid.

    Windows tile the timeline back to back from each pixel's phase offset:
    [start, start+d), [start+d, start+2d), ...  The interval before the
    first window is not integrated, and a trailing window that runs past
    the end of the data is partial.
    """

    rows: int
    cols: int
    ticks: int
    start: np.ndarray     # (rows, cols) first window start = phase offset
    duration: np.ndarray  # (rows, cols) window length in ticks
    tick_ms: float

    def __post_init__(self):
        for name in ("start", "duration"):
            arr = np.asarray(getattr(self, name), dtype=np.int64)
            if arr.shape != (self.rows, self.cols):
                raise ValidationError(f"{name} must have shape (rows, cols)")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if np.any(self.duration <= 0):
            raise ValidationError("window durations must be positive")
        if np.any(self.start < 0):
            raise ValidationError("phase offsets must be non-negative")

    def windows(self, row: int, col: int):
        """Yield (start, end, complete) for pixel (row, col)."""
        s = int(self.start[row, col])
        d = int(self.duration[row, col])
        while s < self.ticks:
            end = s + d
            if end <= self.ticks:
                yield (s, end, True)
            else:
                yield (s, self.ticks, False)
            s = end

    def indicator(self) -> np.ndarray:
        """Binary on/off integration indicator over (row, col, tick)."""
        t = np.arange(self.ticks)
        return (t[None, None, :] >= self.start[:, :, None]).astype(np.float64)

    def valid_mask(self) -> np.ndarray:
        """True where the tick lies inside a complete window."""
        t = np.arange(self.ticks)[None, None, :]
        s = self.start[:, :, None]
        d = self.duration[:, :, None]
        n_complete = np.maximum((self.ticks - s) // d, 0)
        return (t >= s) & (t < s + n_complete * d)


def render_exposure_cube(
    pattern: SamplingPattern, rows: int, cols: int, ticks: int
) -> ExposureCube:
    """Expand the 2x2 tile over the pixel grid.

    Pixel (r, c) receives the tile entry at (r mod 2, c mod 2); its first
    window starts at that entry's phase offset.
    """
    if rows % 2 != 0 or cols % 2 != 0:
        raise ConfigurationError(f"dims must be even for 2x2 tiling, got {rows}x{cols}")
    if ticks < pattern.max_duration_ticks + pattern.max_phase_ticks:
        raise ConfigurationError(
            f"{ticks} ticks cannot hold the longest exposure "
            f"({pattern.max_duration_ticks}) at the largest phase "
            f"({pattern.max_phase_ticks})"
        )
    start = np.zeros((rows, cols), dtype=np.int64)
    duration = np.zeros((rows, cols), dtype=np.int64)
    for i, (cls, phase) in enumerate(pattern.tile):
        r0, c0 = i // 2, i % 2
        start[r0::2, c0::2] = phase
        duration[r0::2, c0::2] = cls.duration_ticks
    return ExposureCube(
        rows=rows, cols=cols, ticks=ticks, start=start, duration=duration,
        tick_ms=pattern.tick_ms,
    )


# ---------------------------------------------------------------------------
# Pipeline stages

def normalize_hdr(p_orig: VideoCube) -> VideoCube:
    """Scale by the 99th-percentile sample and clip to [0, 1]."""
    data = p_orig.data
    if np.any(data < 0):
        raise ValidationError("input irradiance must be non-negative")
    p99 = np.percentile(data, 99.0)
    if p99 <= 0:
        raise ValidationError("99th percentile is zero; degenerate input")
    return p_orig.with_data(np.clip(data / p99, 0.0, 1.0))


def integrate(p: VideoCube, e: ExposureCube) -> VideoCube:
    """Sum the irradiance over each pixel's windows and hold-upsample.

    Unit gain per tick: a window of d ticks over constant p reads d*p.
    Ticks before a pixel's first window are filled with 0; ticks in a
    trailing partial window hold the last complete window's value.
    """
    if p.data.shape != (e.rows, e.cols, e.ticks):
        raise ValidationError(
            f"shape mismatch: cube {p.data.shape} vs exposure "
            f"{(e.rows, e.cols, e.ticks)}"
        )
    ticks = e.ticks
    out = np.zeros(p.data.shape, dtype=np.float64)
    # Pixels sharing (start, duration) are processed together via cumsum.
    combos = {
        (int(s), int(d))
        for s, d in zip(e.start.ravel(), e.duration.ravel())
    }
    for s, d in combos:
        mask = (e.start == s) & (e.duration == d)
        sub = p.data[mask, :].astype(np.float64)  # (npix, ticks)
        cs = np.concatenate(
            [np.zeros((sub.shape[0], 1)), np.cumsum(sub, axis=1)], axis=1
        )
        n_complete = max((ticks - s) // d, 0)
        held = np.zeros_like(sub)
        for k in range(n_complete):
            a, b = s + k * d, s + (k + 1) * d
            held[:, a:b] = (cs[:, b] - cs[:, a])[:, None]
        tail = s + n_complete * d
        if tail < ticks and n_complete > 0:
            held[:, tail:] = held[:, tail - 1][:, None]
        out[mask, :] = held
    return p.with_data(out)


# SplitMix64 constants for the counter-based per-sample noise stream.
_SM_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_SM_M1 = np.uint64(0xBF58476D1CE4E5B9)
_SM_M2 = np.uint64(0x94D049BB133111EB)


def _mix64(x: np.ndarray) -> np.ndarray:
    # modular 64-bit arithmetic: wraparound is the point
    with np.errstate(over="ignore"):
        z = (x + _SM_GAMMA).astype(np.uint64)
        z ^= z >> np.uint64(30)
        z *= _SM_M1
        z ^= z >> np.uint64(27)
        z *= _SM_M2
        z ^= z >> np.uint64(31)
    return z


def _counter_uniforms(seed: int, counters: np.ndarray, stream: int) -> np.ndarray:
    """Uniforms in (0, 1) indexed by (seed, counter, stream); order-free."""
    key = _mix64(np.uint64(seed & 0xFFFFFFFFFFFFFFFF))
    with np.errstate(over="ignore"):
        x = counters.astype(np.uint64) * np.uint64(2) + np.uint64(stream)
        h = _mix64(key + x * _SM_GAMMA)
    return ((h >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0 ** -53


def _poisson_inverse_cdf(lam: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Inverse-transform Poisson draws (intended for lam < 30)."""
    out = np.zeros(lam.shape, dtype=np.float64)
    if lam.size == 0:
        return out
    p = np.exp(-lam)
    cdf = p.copy()
    k = 0
    kmax = int(np.ceil(lam.max() + 12.0 * np.sqrt(lam.max() + 1.0) + 20.0))
    pending = u >= cdf
    while pending.any() and k < kmax:
        k += 1
        p = p * lam / k
        cdf = cdf + p
        out[pending] = k
        pending = u >= cdf
    return out


def add_noise(x: VideoCube, camera: CameraModel, seed: int) -> VideoCube:
    """Shot (Poisson) + read (Gaussian) noise in electron units.

    Each sample's randomness is derived from (seed, row, col, tick), so the
    result is independent of iteration order and bit-identical across runs.
    The Poisson mean scales with the (uncapped) exposure; the drawn charge
    is clipped at the full-well capacity, so over-exposed pixels read the
    well value instead of fluctuating around it.
    """
    from scipy.special import ndtri

    data = x.data
    if np.any(data < 0):
        raise ValidationError("pre-noise exposure values must be non-negative")
    fw = camera.full_well_electrons
    lam = data.astype(np.float64).ravel() * fw
    counters = np.arange(lam.size, dtype=np.uint64)
    u1 = _counter_uniforms(seed, counters, 0)
    u2 = _counter_uniforms(seed, counters, 1)

    electrons = np.zeros_like(lam)
    small = lam < 30.0
    electrons[small] = _poisson_inverse_cdf(lam[small], u1[small])
    big = ~small
    if big.any():
        z = ndtri(u1[big])
        electrons[big] = np.maximum(np.round(lam[big] + np.sqrt(lam[big]) * z), 0.0)

    electrons = np.minimum(electrons, fw)  # the well clips collected charge
    thermal = camera.read_noise_electrons * ndtri(u2)
    out = np.clip((electrons + thermal) / fw, 0.0, None)
    return x.with_data(out.reshape(data.shape))


def apply_crf(x: VideoCube, camera: CameraModel) -> VideoCube:
    """Map exposure values through the response curve into [0, 1]."""
    return x.with_data(camera.response(x.data))


def invert_crf(y: VideoCube, camera: CameraModel) -> VideoCube:
    """Map codes in [0, 1] back to exposure; inverse of :func:`apply_crf`."""
    return y.with_data(camera.inverse_response(y.data))


def quantize(y: VideoCube, camera: CameraModel) -> VideoCube:
    """Round to the camera's code grid (half away from zero)."""
    data = y.data
    if np.any(data < 0) or np.any(data > 1):
        raise ValidationError("quantize input must be in [0, 1]")
    maxc = camera.max_code
    return y.with_data(np.floor(data * maxc + 0.5) / maxc)


def sample(
    p: VideoCube, pattern: SamplingPattern, camera: CameraModel, seed=None
) -> VideoCube:
    """Full forward model: integrate, noise, response, quantize.

    The noise stage is skipped when ``seed`` is None or when the camera's
    noise parameters are degenerate (zero read noise, infinite well).
    """
    e = render_exposure_cube(pattern, p.rows, p.cols, p.ticks)
    y = integrate(p, e)
    noise_free = camera.read_noise_electrons == 0 and not np.isfinite(
        camera.full_well_electrons
    )
    if seed is not None and not noise_free:
        y = add_noise(y, camera, seed)
    y = apply_crf(y, camera)
    return quantize(y, camera)
