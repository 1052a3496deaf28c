"""Quantitative evaluation: PSNR, mean SSIM, temporal contrast, event full
duration, and slanted-edge MTF."""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.signal import fftconvolve

from .core import ValidationError, VideoCube

SSIM_C1 = 1e-4
SSIM_C2 = 9e-4
SSIM_WINDOW = 11
SSIM_SIGMA = 1.5


def _as_array(x) -> np.ndarray:
    if isinstance(x, VideoCube):
        return x.data
    return np.asarray(x, dtype=float)


def psnr(a, b, peak: float = 1.0) -> float:
    """10*log10(peak^2 / MSE) over all samples; +inf when a == b."""
    a, b = _as_array(a), _as_array(b)
    if a.shape != b.shape:
        raise ValidationError(f"shape mismatch {a.shape} vs {b.shape}")
    mse = float(np.mean((a - b) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(peak * peak / mse)


def _gaussian_window(size: int = SSIM_WINDOW, sigma: float = SSIM_SIGMA) -> np.ndarray:
    half = (size - 1) / 2.0
    x = np.arange(size) - half
    g = np.exp(-(x ** 2) / (2.0 * sigma ** 2))
    k = np.outer(g, g)
    return k / k.sum()


def ssim_map(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Per-window SSIM over all valid (fully interior) window positions."""
    a, b = _as_array(a), _as_array(b)
    if a.shape != b.shape or a.ndim != 2:
        raise ValidationError("ssim expects two equal-shape 2-D frames")
    if min(a.shape) < SSIM_WINDOW:
        raise ValidationError(
            f"frame {a.shape} smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} window"
        )
    k = _gaussian_window()
    mu_a = fftconvolve(a, k, mode="valid")
    mu_b = fftconvolve(b, k, mode="valid")
    ex_aa = fftconvolve(a * a, k, mode="valid")
    ex_bb = fftconvolve(b * b, k, mode="valid")
    ex_ab = fftconvolve(a * b, k, mode="valid")
    var_a = ex_aa - mu_a * mu_a
    var_b = ex_bb - mu_b * mu_b
    cov = ex_ab - mu_a * mu_b
    num = (2.0 * mu_a * mu_b + SSIM_C1) * (2.0 * cov + SSIM_C2)
    den = (mu_a * mu_a + mu_b * mu_b + SSIM_C1) * (var_a + var_b + SSIM_C2)
    return num / den


def mssim(a, b) -> float:
    """Mean SSIM of two frames under the 11-tap Gaussian window."""
    return float(np.mean(ssim_map(a, b)))


def mssim_video(a: VideoCube, b: VideoCube) -> float:
    """Frame-wise mean SSIM averaged over ticks."""
    if a.data.shape != b.data.shape:
        raise ValidationError("cubes must share dimensions")
    return float(np.mean([mssim(a.frame(t), b.frame(t)) for t in range(a.ticks)]))


def temporal_contrast(series, window=None) -> float:
    """Michelson-style contrast (peak - trough)/(peak + trough) of a pixel
    time series over an explicit tick window."""
    v = np.asarray(series, dtype=float)
    if v.ndim != 1 or v.size == 0:
        raise ValidationError("series must be a non-empty 1-D array")
    if np.any(v < 0):
        raise ValidationError("series must be non-negative")
    if window is not None:
        v = v[window[0]:window[1]]
        if v.size == 0:
            raise ValidationError("window selects no samples")
    peak, trough = float(v.max()), float(v.min())
    if peak + trough == 0:
        raise ValidationError("peak + trough is zero; contrast undefined")
    return (peak - trough) / (peak + trough)


def full_duration(
    series, tick_ms: float = 1.0, window=None, frac: float = 0.15, times_ms=None
) -> float:
    """Timespan between the threshold crossings flanking the dominant peak.

    The threshold sits at ``frac`` of the peak above the in-window trough.
    Crossings are located with sub-sample linear interpolation; a series
    may carry explicit (non-decreasing) sample times, with repeated times
    encoding instantaneous jumps.
    """
    v = np.asarray(series, dtype=float)
    if v.ndim != 1 or v.size < 3:
        raise ValidationError("series must be 1-D with at least 3 samples")
    if times_ms is None:
        t = np.arange(v.size, dtype=float) * tick_ms
    else:
        t = np.asarray(times_ms, dtype=float)
        if t.shape != v.shape or np.any(np.diff(t) < 0):
            raise ValidationError("times_ms must be non-decreasing and match series")
    lo, hi = (0, v.size) if window is None else window
    seg = v[lo:hi]
    if seg.size == 0:
        raise ValidationError("window selects no samples")
    peak_idx = lo + int(np.argmax(seg))
    peak = v[peak_idx]
    baseline = float(seg.min())
    if peak <= baseline:
        raise ValidationError("series has no peak above its trough")
    thr = baseline + frac * (peak - baseline)

    def crossing(i0, step):
        i = i0
        while 0 <= i + step < v.size:
            j = i + step
            # v[i] is the sample nearer the peak on either side
            lo_v, hi_v = v[j], v[i]
            if hi_v >= thr > lo_v:
                a, b = (j, i) if step < 0 else (i, j)
                dv = v[b] - v[a]
                if dv == 0 or t[b] == t[a]:
                    return t[a]
                return t[a] + (thr - v[a]) / dv * (t[b] - t[a])
            i = j
        return None

    rise = crossing(peak_idx, -1)
    fall = crossing(peak_idx, +1)
    if rise is None or fall is None:
        raise ValidationError("no threshold crossing on one side of the peak")
    return float(fall - rise)


# ---------------------------------------------------------------------------
# Slanted-edge MTF

@dataclass(frozen=True)
class EdgeAnalysis:
    esf_positions_px: np.ndarray   # edge-normal coordinate of each ESF bin
    esf: np.ndarray                # oversampled edge spread
    lsf: np.ndarray                # windowed line spread
    mtf_freq_cpp: np.ndarray       # cycles/pixel
    mtf: np.ndarray                # normalized to 1 at DC
    mtf50: float
    rise_10_90_px: float
    edge_angle_deg: float


_OVERSAMPLE = 4          # bins per pixel along the edge normal
_BIN = 1.0 / _OVERSAMPLE


def _esf_crossing(positions, esf, level):
    """First crossing of ``level`` along the (low-to-high) ESF."""
    above = esf >= level
    idx = np.argmax(above)
    if idx == 0 or not above.any():
        return positions[0]
    a, b = idx - 1, idx
    dv = esf[b] - esf[a]
    if dv == 0:
        return positions[b]
    return positions[a] + (level - esf[a]) / dv * (positions[b] - positions[a])


def slanted_edge_mtf(frame, roi=None) -> EdgeAnalysis:
    """Spatial frequency response from a single near-vertical slanted edge.

    Per-row edge positions come from gradient centroids, the edge line is
    fit by least squares, and all pixels are projected onto the edge-normal
    axis into quarter-pixel bins.  The binned ESF is differentiated,
    Hann-windowed and Fourier-transformed; the known transfer of the
    quarter-pixel binning and of the central-difference derivative is
    divided back out so the reported MTF reflects the image alone.
    """
    img = _as_array(frame)
    if img.ndim != 2:
        raise ValidationError("slanted-edge input must be a 2-D frame")
    if roi is not None:
        r0, r1, c0, c1 = roi
        img = img[r0:r1, c0:c1]
    rows, cols = img.shape
    if rows < 8 or cols < 8:
        raise ValidationError("ROI too small for edge analysis")

    grad = np.gradient(img, axis=1)
    strength = np.abs(grad).sum(axis=1)
    if strength.max() <= 1e-9 * max(1.0, img.max() - img.min()) or img.max() == img.min():
        raise ValidationError("no edge detected in ROI (gradient below threshold)")
    weights = np.abs(grad)
    x = np.arange(cols, dtype=float)
    centroids = (weights * x).sum(axis=1) / weights.sum(axis=1)

    r = np.arange(rows, dtype=float)
    slope, intercept = np.polyfit(r, centroids, 1)
    angle = math.degrees(math.atan(slope))
    if not 2.0 <= abs(angle) <= 10.0:
        warnings.warn(
            f"edge slant {angle:.2f} deg outside the recommended 2-10 deg range",
            stacklevel=2,
        )

    # signed distance from each pixel center to the fitted edge line
    cos_t = 1.0 / math.sqrt(1.0 + slope * slope)
    rr, cc = np.meshgrid(r, x, indexing="ij")
    dist = (cc - (slope * rr + intercept)) * cos_t

    half_span = min(dist.max(), -dist.min())
    if half_span < 2.0:
        raise ValidationError("edge too close to the ROI border")
    edges = np.arange(-half_span, half_span + _BIN / 2, _BIN)
    idx = np.digitize(dist.ravel(), edges) - 1
    nbins = len(edges) - 1
    keep = (idx >= 0) & (idx < nbins)
    sums = np.bincount(idx[keep], weights=img.ravel()[keep], minlength=nbins)
    counts = np.bincount(idx[keep], minlength=nbins)
    esf = np.divide(sums, counts, out=np.zeros(nbins), where=counts > 0)
    centers = edges[:-1] + _BIN / 2
    empty = counts == 0
    if empty.any():
        esf[empty] = np.interp(centers[empty], centers[~empty], esf[~empty])

    if esf[0] > esf[-1]:  # normalize polarity to dark -> bright
        esf = esf[::-1].copy()

    lsf = np.zeros_like(esf)
    lsf[1:-1] = (esf[2:] - esf[:-2]) / (2.0 * _BIN)
    lsf *= np.hanning(len(lsf))

    spectrum = np.abs(np.fft.rfft(lsf))
    if spectrum[0] == 0:
        raise ValidationError("degenerate spectrum (flat ESF)")
    freq = np.fft.rfftfreq(len(lsf), d=_BIN)
    mtf = spectrum / spectrum[0]
    # compensate quarter-pixel bin averaging and the central-difference
    # derivative response, both plain sincs in this normalization
    comp = np.sinc(freq * _BIN) * np.sinc(2.0 * freq * _BIN)
    good = comp > 0.05
    mtf = np.where(good, mtf / np.where(good, comp, 1.0), mtf)

    half = freq <= 2.0  # report up to twice Nyquist of the original grid
    freq, mtf = freq[half], mtf[half]

    below = np.nonzero(mtf < 0.5)[0]
    if below.size == 0:
        mtf50 = float(freq[-1])
    else:
        j = below[0]
        if j == 0:
            mtf50 = float(freq[0])
        else:
            f0, f1 = freq[j - 1], freq[j]
            m0, m1 = mtf[j - 1], mtf[j]
            mtf50 = float(f0 + (0.5 - m0) / (m1 - m0) * (f1 - f0))

    lo_level = esf[:max(2, nbins // 10)].mean()
    hi_level = esf[-max(2, nbins // 10):].mean()
    p10 = _esf_crossing(centers, esf, lo_level + 0.1 * (hi_level - lo_level))
    p90 = _esf_crossing(centers, esf, lo_level + 0.9 * (hi_level - lo_level))
    rise = float(abs(p90 - p10))

    return EdgeAnalysis(
        esf_positions_px=centers,
        esf=esf,
        lsf=lsf,
        mtf_freq_cpp=freq,
        mtf=mtf,
        mtf50=mtf50,
        rise_10_90_px=rise,
        edge_angle_deg=float(angle),
    )


def write_edge_csv(path, analysis: EdgeAnalysis) -> None:
    """ESF/LSF/MTF curves as a single CSV (blank fields where lengths differ)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["position_px", "esf", "lsf", "freq_cpp", "mtf"])
        n = max(len(analysis.esf), len(analysis.mtf))
        for i in range(n):
            row = []
            if i < len(analysis.esf):
                row += [f"{analysis.esf_positions_px[i]:.6g}", f"{analysis.esf[i]:.9g}",
                        f"{analysis.lsf[i]:.9g}"]
            else:
                row += ["", "", ""]
            if i < len(analysis.mtf):
                row += [f"{analysis.mtf_freq_cpp[i]:.6g}", f"{analysis.mtf[i]:.9g}"]
            else:
                row += ["", ""]
            writer.writerow(row)
