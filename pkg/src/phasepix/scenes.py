"""Synthetic ground-truth generators and dataset preparation.

Scene generators are deterministic functions of their spec and render in
linear light.  Most emit values already inside [0, 1]; hdr_composite
deliberately spans 0.01-4.0 pre-normalization so that saturation paths
get exercised after normalize_hdr.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .core import (
    CameraModel,
    ConfigurationError,
    SamplingPattern,
    ValidationError,
    VideoCube,
    save_vcube,
    load_vcube,
)
from .sensor import normalize_hdr, sample as sensor_sample

SCENE_KINDS = ("led_pair", "rotating_letter", "slanted_edge", "hdr_composite", "impulse")


@dataclass(frozen=True)
class SceneSpec:
    kind: str
    rows: int = 64
    cols: int = 64
    ticks: int = 32
    tick_ms: float = 1.0
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in SCENE_KINDS:
            raise ConfigurationError(f"unknown scene kind {self.kind!r}")
        if min(self.rows, self.cols, self.ticks) <= 0 or self.tick_ms <= 0:
            raise ConfigurationError("scene dims and tick_ms must be positive")


def _disk_mask(rows, cols, center, radius):
    rr, cc = np.mgrid[0:rows, 0:cols]
    return (rr - center[0]) ** 2 + (cc - center[1]) ** 2 <= radius ** 2


def _gen_impulse(spec: SceneSpec) -> np.ndarray:
    tick = int(spec.params.get("tick", spec.ticks // 2))
    value = float(spec.params.get("value", 1.0))
    if not 0 <= tick < spec.ticks:
        raise ConfigurationError(f"impulse tick {tick} outside cube")
    data = np.zeros((spec.rows, spec.cols, spec.ticks))
    data[:, :, tick] = value
    return data


def _gen_led_pair(spec: SceneSpec) -> np.ndarray:
    p = spec.params
    t0 = int(p.get("t0_tick", spec.ticks // 4))
    # default switch-on delay ~2 ms, expressed on the tick grid
    delay = int(p.get("delay_ticks", max(1, round(2.0 / spec.tick_ms))))
    on_ticks = p.get("on_ticks")  # None: LEDs stay on once switched
    intensity = float(p.get("intensity", 1.0))
    ambient = float(p.get("ambient", 0.0))
    radius = float(p.get("radius", min(spec.rows, spec.cols) / 8))
    c_l = p.get("center_l", (spec.rows // 2, spec.cols // 3))
    c_r = p.get("center_r", (spec.rows // 2, (2 * spec.cols) // 3))

    data = np.full((spec.rows, spec.cols, spec.ticks), ambient)
    t = np.arange(spec.ticks)
    for center, onset in ((c_l, t0), (c_r, t0 + delay)):
        mask = _disk_mask(spec.rows, spec.cols, center, radius)
        if on_ticks is None:
            active = t >= onset
        else:
            active = (t >= onset) & (t < onset + int(on_ticks))
        add = np.where(active, intensity, 0.0)
        data[mask] = np.maximum(data[mask], (ambient + add)[None, :])
    return data


_LETTER_STROKES = {
    # unit-square rectangles (r0, r1, c0, c1) composing each glyph
    "H": [(0.0, 1.0, 0.0, 0.25), (0.0, 1.0, 0.75, 1.0), (0.4, 0.6, 0.25, 0.75)],
    "T": [(0.0, 0.25, 0.0, 1.0), (0.25, 1.0, 0.375, 0.625)],
    "L": [(0.0, 1.0, 0.0, 0.25), (0.75, 1.0, 0.25, 1.0)],
}


def _letter_mask_at(letter, size, orbit, angle_rad, rows, cols):
    """Membership test of each pixel in the rotated letter glyph.

    The glyph sits with its center ``orbit`` pixels from the frame center;
    the whole assembly rotates about the frame center.
    """
    strokes = _LETTER_STROKES[letter]
    rr, cc = np.mgrid[0:rows, 0:cols].astype(float)
    cr, ccen = (rows - 1) / 2.0, (cols - 1) / 2.0
    dr, dc = rr - cr, cc - ccen
    cos_a, sin_a = math.cos(-angle_rad), math.sin(-angle_rad)
    ur = cos_a * dr - sin_a * dc       # inverse-rotated coordinates
    uc = sin_a * dr + cos_a * dc
    # letter box centered at (-orbit, 0) in the unrotated frame
    lr = (ur + orbit) / size + 0.5
    lc = uc / size + 0.5
    mask = np.zeros((rows, cols), dtype=bool)
    for (r0, r1, c0, c1) in strokes:
        mask |= (lr >= r0) & (lr < r1) & (lc >= c0) & (lc < c1)
    return mask


def _gen_rotating_letter(spec: SceneSpec) -> np.ndarray:
    p = spec.params
    rpm = float(p.get("rpm", 300.0))
    letter = str(p.get("letter", "H"))
    if letter not in _LETTER_STROKES:
        raise ConfigurationError(f"no glyph for letter {letter!r}")
    size = float(p.get("letter_size", min(spec.rows, spec.cols) / 4))
    orbit = float(p.get("orbit", min(spec.rows, spec.cols) / 4))
    if orbit + size / 2 > min(spec.rows, spec.cols) / 2 * math.sqrt(2):
        raise ConfigurationError("letter orbit/size exceed the frame")
    ambient = float(p.get("ambient", 0.25))
    letter_value = float(p.get("letter_value", 1.0))
    theta0 = float(p.get("theta0_deg", 0.0))
    hotspot = p.get("hotspot")  # (row, col, radius, value) or None

    deg_per_tick = rpm * 6.0 / 1000.0 * spec.tick_ms  # rpm -> deg/ms
    data = np.full((spec.rows, spec.cols, spec.ticks), ambient)
    for t in range(spec.ticks):
        ang = math.radians(theta0 + deg_per_tick * t)
        mask = _letter_mask_at(letter, size, orbit, ang, spec.rows, spec.cols)
        data[:, :, t][mask] = letter_value
    if hotspot is not None:
        # a glare disk lifting the local background; brighter moving content
        # stays visible through it
        hr, hc, hrad, hval = hotspot
        disk = _disk_mask(spec.rows, spec.cols, (hr, hc), hrad)
        data[disk, :] = np.maximum(data[disk, :], hval)
    return data


def _edge_coverage(rows, cols, angle_deg, offset_col, dark, bright):
    """Pixel-aperture sampling of an ideal step edge.

    Each pixel's value is the exact area fraction of its unit aperture on
    the bright side of the line  col = offset + tan(angle) * (row - mid).
    """
    m = math.tan(math.radians(angle_deg))
    rr = np.arange(rows, dtype=float)[:, None]
    cc = np.arange(cols, dtype=float)[None, :]
    mid = (rows - 1) / 2.0

    def edge_col(y):
        return offset_col + m * (y - mid)

    # signed overlap before clipping, at the pixel's two row extremes
    u1 = cc + 0.5 - edge_col(rr - 0.5)
    u2 = cc + 0.5 - edge_col(rr + 0.5)

    def anti(u):
        # antiderivative of clip(u, 0, 1)
        return np.where(u <= 0, 0.0, np.where(u >= 1, u - 0.5, 0.5 * u * u))

    du = u2 - u1
    flat = np.isclose(du, 0.0)
    frac = np.where(
        flat,
        np.clip(u1, 0.0, 1.0),
        (anti(u2) - anti(u1)) / np.where(flat, 1.0, du),
    )
    return dark + (bright - dark) * np.clip(frac, 0.0, 1.0)


def _gen_slanted_edge(spec: SceneSpec) -> np.ndarray:
    p = spec.params
    angle = float(p.get("angle_deg", 5.0))
    offset = float(p.get("offset_col", (spec.cols - 1) / 2.0))
    dark = float(p.get("dark", 0.1))
    bright = float(p.get("bright", 0.9))
    frame = _edge_coverage(spec.rows, spec.cols, angle, offset, dark, bright)
    return np.repeat(frame[:, :, None], spec.ticks, axis=2)


def _gen_hdr_composite(spec: SceneSpec) -> np.ndarray:
    """Dark resolution target + bright bulb + glow + rotating dark letter.

    Pre-normalization values span 0.01 (target bars) to 4.0 (bulb); the
    bulb disk covers >1% of the frame so it pins the 99th percentile.
    """
    p = dict(spec.params)
    ambient = float(p.get("ambient", 0.25))
    bar_value = float(p.get("bar_value", 0.01))
    bulb_value = float(p.get("bulb_value", 4.0))
    glow_value = float(p.get("glow_value", 1.8))

    letter_spec = SceneSpec(
        kind="rotating_letter", rows=spec.rows, cols=spec.cols, ticks=spec.ticks,
        tick_ms=spec.tick_ms,
        params={
            "rpm": float(p.get("rpm", 300.0)),
            "letter": p.get("letter", "H"),
            "letter_size": p.get("letter_size", min(spec.rows, spec.cols) / 5),
            "orbit": p.get("orbit", min(spec.rows, spec.cols) / 4),
            "ambient": ambient,
            "letter_value": float(p.get("letter_value", 0.1)),
            "theta0_deg": p.get("theta0_deg", 0.0),
        },
    )
    data = _gen_rotating_letter(letter_spec)

    # resolution-target bars in the darkest corner
    bar_h = max(2, spec.rows // 16)
    r0 = spec.rows // 12
    c0 = spec.cols // 12
    width = spec.cols // 4
    for i in range(3):
        rr = r0 + 2 * i * bar_h
        data[rr:rr + bar_h, c0:c0 + width, :] = bar_value

    # bulb: bright disk pinning p99, with a fainter glow annulus
    bulb_r = float(p.get("bulb_radius", math.sqrt(0.015 * spec.rows * spec.cols / math.pi)))
    center = p.get("bulb_center", (spec.rows // 4, (3 * spec.cols) // 4))
    glow = _disk_mask(spec.rows, spec.cols, center, bulb_r * 1.8)
    bulb = _disk_mask(spec.rows, spec.cols, center, bulb_r)
    data[glow & ~bulb, :] = glow_value
    data[bulb, :] = bulb_value
    return data


def gen_scene(spec: SceneSpec) -> VideoCube:
    """Deterministic irradiance cube for the given scene spec."""
    gen = {
        "impulse": _gen_impulse,
        "led_pair": _gen_led_pair,
        "rotating_letter": _gen_rotating_letter,
        "slanted_edge": _gen_slanted_edge,
        "hdr_composite": _gen_hdr_composite,
    }[spec.kind]
    return VideoCube(data=gen(spec), tick_ms=spec.tick_ms)


# ---------------------------------------------------------------------------
# Dataset preparation

def crop_cubes(video: VideoCube, size=(128, 128, 8), temporal_overlap=0.5):
    """Tile a video into training crops.

    Spatial tiling is non-overlapping on the crop grid (remainders are
    dropped); the temporal stride is size_t * (1 - overlap).  Returns a
    list of (cube, (r0, c0, t0)).
    """
    cr, cc, ct = size
    if video.rows < cr or video.cols < cc or video.ticks < ct:
        raise ValidationError(
            f"video {video.data.shape} smaller than one {size} crop"
        )
    stride_t = max(1, int(round(ct * (1.0 - temporal_overlap))))
    out = []
    for r0 in range(0, video.rows - cr + 1, cr):
        for c0 in range(0, video.cols - cc + 1, cc):
            for t0 in range(0, video.ticks - ct + 1, stride_t):
                crop = video.data[r0:r0 + cr, c0:c0 + cc, t0:t0 + ct]
                out.append((video.with_data(crop), (r0, c0, t0)))
    return out


def augment_rotations(cubes):
    """Each cube plus its three spatial rotations, as (cube, quarter_turns).

    Accepts the output of :func:`crop_cubes` (cube, origin) pairs or bare
    cubes.  Rotation permutes the 2x2 tile, so consumers must re-derive
    pattern metadata with SamplingPattern.rotated(quarter_turns).
    """
    out = []
    for item in cubes:
        cube, origin = item if isinstance(item, tuple) else (item, None)
        if cube.rows != cube.cols:
            raise ValidationError("rotation augmentation needs square frames")
        for k in range(4):
            data = np.rot90(cube.data, k=k, axes=(0, 1)) if k else cube.data
            out.append((cube.with_data(np.ascontiguousarray(data)), origin, k))
    return out


MANIFEST_VERSION = 1
_MANIFEST_HEADER = f"# phasepix dataset manifest v{MANIFEST_VERSION}"
_MANIFEST_FIELDS = (
    "y_mea", "p", "pattern_id", "camera_id", "origin_r", "origin_c", "origin_t",
    "augmentation",
)


@dataclass
class DatasetManifest:
    records: list
    version: int = MANIFEST_VERSION

    def save(self, path) -> None:
        lines = [_MANIFEST_HEADER, "\t".join(_MANIFEST_FIELDS)]
        for rec in self.records:
            lines.append("\t".join(str(rec[k]) for k in _MANIFEST_FIELDS))
        Path(path).write_text("\n".join(lines) + "\n")

    @classmethod
    def load(cls, path) -> "DatasetManifest":
        lines = Path(path).read_text().splitlines()
        if not lines or not lines[0].startswith("# phasepix dataset manifest"):
            raise ValidationError(f"{path}: not a dataset manifest")
        match = re.search(r"v(\d+)$", lines[0])
        version = int(match.group(1)) if match else 0
        fields = tuple(lines[1].split("\t"))
        if fields != _MANIFEST_FIELDS:
            raise ValidationError(f"{path}: unexpected manifest columns {fields}")
        records = []
        for line in lines[2:]:
            if not line.strip():
                continue
            values = line.split("\t")
            records.append(dict(zip(_MANIFEST_FIELDS, values)))
        return cls(records=records, version=version)


def make_dataset(
    videos,
    pattern: SamplingPattern,
    camera: CameraModel,
    seed: int,
    out_dir,
    crop_size=(128, 128, 8),
    augment: bool = False,
    normalize: bool = True,
    overwrite: bool = False,
    pattern_id: str = "default",
    camera_id: str = "default",
) -> DatasetManifest:
    """Render (p, y_mea, LDR-target) file groups for every training crop.

    The sensor runs over each full video (its measurement stream exists
    continuously, and crops shorter than the longest exposure window could
    not be simulated in isolation); measurement crops are then sliced at
    the same origins as the ground-truth crops.  The LDR targets are the
    response applied at the three exposure gains: R(2p), R(4p), R(8p),
    unquantized.  File naming and per-video noise seeds are deterministic
    functions of (seed, video index), so the same inputs always produce a
    byte-identical dataset.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    manifest_path = out / "manifest.tsv"
    if manifest_path.exists() and not overwrite:
        raise FileExistsError(f"{manifest_path} exists; pass overwrite=True")

    records = []
    index = 0
    for vid_index, video in enumerate(videos):
        p_full = normalize_hdr(video) if normalize else video
        y_full = sensor_sample(p_full, pattern, camera,
                               seed=seed * 1_000_003 + vid_index)
        crops = crop_cubes(p_full, size=crop_size)
        items = augment_rotations(crops) if augment else [
            (cube, origin, 0) for cube, origin in crops
        ]
        for cube, origin, rot in items:
            r0, c0, t0 = origin
            cr, cc, ct = cube.data.shape
            y_crop = y_full.data[r0:r0 + cr, c0:c0 + cc, t0:t0 + ct]
            if rot:
                y_crop = np.rot90(y_crop, k=rot, axes=(0, 1))
            y_mea = cube.with_data(np.ascontiguousarray(y_crop))
            group = {"p": cube, "y_mea": y_mea}
            for slot, gain in (("y_low", 2), ("y_mid", 4), ("y_high", 8)):
                group[slot] = cube.with_data(camera.response(gain * cube.data))
            paths = {}
            for slot, c in group.items():
                path = out / f"crop_{index:05d}_{slot}.vcube"
                if path.exists() and not overwrite:
                    raise FileExistsError(f"{path} exists; pass overwrite=True")
                save_vcube(c, path)
                paths[slot] = path.name
            records.append({
                "y_mea": paths["y_mea"],
                "p": paths["p"],
                "pattern_id": pattern_id if rot == 0 else f"{pattern_id}_rot{rot}",
                "camera_id": camera_id,
                "origin_r": origin[0],
                "origin_c": origin[1],
                "origin_t": origin[2],
                "augmentation": f"rot{90 * rot}",
            })
            index += 1
    manifest = DatasetManifest(records=records)
    manifest.save(manifest_path)
    return manifest


# ---------------------------------------------------------------------------
# External HDR ingestion

def _read_pfm(path):
    with open(path, "rb") as fh:
        header = fh.readline().strip()
        if header not in (b"PF", b"Pf"):
            raise ValidationError(f"{path}: not a PFM file (header {header!r})")
        channels = 3 if header == b"PF" else 1
        line = fh.readline().strip()
        while line.startswith(b"#"):
            line = fh.readline().strip()
        width, height = (int(v) for v in line.split())
        scale = float(fh.readline().strip())
        dtype = "<f4" if scale < 0 else ">f4"
        count = width * height * channels
        data = np.frombuffer(fh.read(count * 4), dtype=dtype)
        if data.size != count:
            raise ValidationError(f"{path}: truncated PFM payload")
    img = data.reshape(height, width, channels)
    return img[::-1, :, :]  # PFM rows are bottom-up


def downsample_half(video: VideoCube) -> VideoCube:
    """2x2 spatial box averaging (drops odd remainders)."""
    r2, c2 = (video.rows // 2) * 2, (video.cols // 2) * 2
    d = video.data[:r2, :c2, :]
    out = 0.25 * (d[0::2, 0::2] + d[1::2, 0::2] + d[0::2, 1::2] + d[1::2, 1::2])
    return video.with_data(out)


def ingest_hdr_sequence(path, fmt: str = "pfm_sequence", tick_ms: float = 1.0):
    """Stack external HDR frames into a cube.

    pfm_sequence: every .pfm in the directory, lexicographic order = tick
    order; 3-channel frames collapse to grayscale by channel mean.
    vcube: a single .vcube file.  Negative samples are clamped to zero and
    counted.  Returns (cube, clamped_count).
    """
    src = Path(path)
    if fmt == "vcube":
        cube = load_vcube(src)
        return cube, 0
    if fmt != "pfm_sequence":
        raise ConfigurationError(f"unknown ingestion format {fmt!r}")
    files = sorted(src.glob("*.pfm"))
    if not files:
        raise ValidationError(f"{src}: no .pfm frames found")
    frames = []
    shape = None
    for f in files:
        try:
            img = _read_pfm(f)
        except (OSError, ValueError) as exc:
            raise ValidationError(f"unreadable frame {f}: {exc}") from exc
        gray = img.mean(axis=2)
        if shape is None:
            shape = gray.shape
        elif gray.shape != shape:
            raise ValidationError(
                f"{f}: frame dims {gray.shape} differ from {shape}"
            )
        frames.append(gray)
    stack = np.stack(frames, axis=2).astype(np.float64)
    clamped = int((stack < 0).sum())
    stack = np.clip(stack, 0.0, None)
    return VideoCube(data=stack, tick_ms=tick_ms), clamped
