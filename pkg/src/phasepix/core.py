"""Domain types and the ``.vcube`` binary container.

Every module in the package exchanges video data through :class:`VideoCube`,
a dense (rows, cols, ticks) scalar field in row-major order.  The on-disk
format is deliberately minimal: a fixed 32-byte header followed by the raw
little-endian float32 payload, so that round trips are bit-exact and files
are trivially mappable from other tools.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

VCUBE_MAGIC = b"VCUB"
VCUBE_VERSION = 1

# magic | version | rows | cols | ticks | tick_us | reserved (8 bytes, zero)
_VCUBE_HEADER = struct.Struct("<4s5I8s")
assert _VCUBE_HEADER.size == 32


class ValidationError(ValueError):
    """An input violates a documented type or operation invariant."""


class FormatError(ValueError):
    """A file does not conform to the expected on-disk layout."""


class TruncationError(FormatError):
    """Declared dimensions and payload length disagree."""


class ConfigurationError(ValueError):
    """A configuration (pattern, camera, scene) is internally inconsistent."""


# ---------------------------------------------------------------------------
# Video cube

@dataclass(frozen=True)
class VideoCube:
    """A 3D scalar field of linear irradiance or dimensionless pixel values.

    ``data`` has shape (rows, cols, ticks), row-major.  The array is frozen
    at construction; all pipeline stages produce new cubes.
    """

    data: np.ndarray
    tick_ms: float

    def __post_init__(self):
        arr = np.asarray(self.data)
        if arr.ndim != 3:
            raise ValidationError(f"cube data must be 3-D, got shape {arr.shape}")
        if any(s <= 0 for s in arr.shape):
            raise ValidationError(f"cube dimensions must be positive, got {arr.shape}")
        if not np.isfinite(arr).all():
            raise ValidationError("cube contains non-finite values")
        if not self.tick_ms > 0:
            raise ValidationError(f"tick_ms must be positive, got {self.tick_ms}")
        arr = np.ascontiguousarray(arr)
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)

    @property
    def rows(self) -> int:
        return self.data.shape[0]

    @property
    def cols(self) -> int:
        return self.data.shape[1]

    @property
    def ticks(self) -> int:
        return self.data.shape[2]

    @property
    def duration_ms(self) -> float:
        return self.ticks * self.tick_ms

    def frame(self, t: int) -> np.ndarray:
        """The (rows, cols) slice at tick ``t``."""
        return self.data[:, :, t]

    def with_data(self, data: np.ndarray) -> "VideoCube":
        """A new cube with the same timing but different samples."""
        return VideoCube(data=data, tick_ms=self.tick_ms)

    def allclose(self, other: "VideoCube", **kw) -> bool:
        return (
            self.data.shape == other.data.shape
            and self.tick_ms == other.tick_ms
            and np.allclose(self.data, other.data, **kw)
        )


def save_vcube(cube: VideoCube, path) -> None:
    """Write ``cube`` to ``path`` in the .vcube format (float32 payload).

    Byte-identical for identical inputs; tick duration is stored as an
    integer number of microseconds.
    """
    tick_us = int(round(cube.tick_ms * 1000.0))
    if tick_us <= 0:
        raise ValidationError(f"tick duration {cube.tick_ms} ms rounds to 0 us")
    payload = np.ascontiguousarray(cube.data, dtype="<f4")
    if not np.isfinite(payload).all():
        raise ValidationError("non-finite data after float32 conversion")
    header = _VCUBE_HEADER.pack(
        VCUBE_MAGIC, VCUBE_VERSION, cube.rows, cube.cols, cube.ticks, tick_us, b"\0" * 8
    )
    try:
        with open(path, "wb") as fh:
            fh.write(header)
            fh.write(payload.tobytes())
    except OSError as exc:
        raise OSError(f"failed writing vcube to {path}: {exc}") from exc


def load_vcube(path) -> VideoCube:
    """Read a .vcube file, verifying magic, dimensions and payload length."""
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
    except OSError as exc:
        raise OSError(f"failed reading vcube from {path}: {exc}") from exc
    if len(raw) < _VCUBE_HEADER.size:
        raise FormatError(f"{path}: file shorter than the 32-byte header")
    magic, version, rows, cols, ticks, tick_us, _ = _VCUBE_HEADER.unpack_from(raw)
    if magic != VCUBE_MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}")
    if version != VCUBE_VERSION:
        raise FormatError(f"{path}: unsupported version {version}")
    if rows <= 0 or cols <= 0 or ticks <= 0:
        raise ValidationError(f"{path}: non-positive dimensions {(rows, cols, ticks)}")
    if tick_us <= 0:
        raise ValidationError(f"{path}: non-positive tick duration {tick_us} us")
    expected = rows * cols * ticks * 4
    body = raw[_VCUBE_HEADER.size:]
    if len(body) != expected:
        raise TruncationError(
            f"{path}: payload is {len(body)} bytes, header declares {expected}"
        )
    data = np.frombuffer(body, dtype="<f4").reshape(rows, cols, ticks)
    if not np.isfinite(data).all():
        raise ValidationError(f"{path}: payload contains non-finite values")
    return VideoCube(data=data, tick_ms=tick_us / 1000.0)


# ---------------------------------------------------------------------------
# Sampling pattern

# Relative exposure multiples of the three classes, in units of T_E/2.
CLASS_GAINS = {"short": 2, "mid": 4, "long": 8}


@dataclass(frozen=True)
class ExposureClass:
    """One of the three exposure durations in the 2x2 tile."""

    name: str
    duration_ticks: int

    def __post_init__(self):
        if self.name not in CLASS_GAINS:
            raise ConfigurationError(f"unknown exposure class {self.name!r}")
        if self.duration_ticks <= 0:
            raise ConfigurationError("duration_ticks must be positive")

    @property
    def gain_label(self) -> int:
        """Relative exposure multiple (short=2, mid=4, long=8)."""
        return CLASS_GAINS[self.name]


def _default_tile(base_ticks: int):
    short = ExposureClass("short", base_ticks // 2)
    mid = ExposureClass("mid", base_ticks)
    long = ExposureClass("long", 2 * base_ticks)
    # Row-major tile assignment with one short, two mids, one long; the
    # four phases are the quarter-base offsets, pairwise distinct so the
    # replica cancellation holds.
    quarter = base_ticks // 4
    return (
        (short, 0),
        (mid, quarter),
        (mid, 2 * quarter),
        (long, 3 * quarter),
    )


@dataclass(frozen=True)
class SamplingPattern:
    """Per-pixel exposure class and phase over a 2x2 tile.

    ``tile`` lists (class, phase_offset_ticks) for tile positions
    (0,0), (0,1), (1,0), (1,1) in row-major order.  Phase offsets are in
    ticks, i.e. multiples of a quarter of the base exposure when the base
    spans four ticks.  Each pixel integrates back to back with no dead
    time, so its sampling period equals its exposure duration.
    """

    tile: tuple = None
    base_exposure_ticks: int = 4
    tick_ms: float = 1.0

    def __post_init__(self):
        if self.base_exposure_ticks <= 0:
            raise ConfigurationError("base_exposure_ticks must be positive")
        if not self.tick_ms > 0:
            raise ConfigurationError("tick_ms must be positive")
        tile = self.tile
        if tile is None:
            if self.base_exposure_ticks % 4 != 0:
                raise ConfigurationError(
                    "default tile needs a base exposure divisible by 4 "
                    "(short = base/2, phases at quarter-base offsets)"
                )
            tile = _default_tile(self.base_exposure_ticks)
        tile = tuple(tile)
        if len(tile) != 4:
            raise ConfigurationError("tile must have exactly 4 entries")
        phases = [p for _, p in tile]
        quarter = self.base_exposure_ticks // 4 if self.base_exposure_ticks >= 4 else 1
        for cls, phase in tile:
            if not isinstance(cls, ExposureClass):
                raise ConfigurationError("tile entries must be (ExposureClass, phase)")
            if phase < 0 or phase >= self.base_exposure_ticks:
                raise ConfigurationError(
                    f"phase {phase} outside [0, {self.base_exposure_ticks})"
                )
            if quarter and phase % quarter != 0:
                raise ConfigurationError(
                    f"phase {phase} is not a multiple of T_E/4 = {quarter} ticks"
                )
        if len(set(phases)) != 4:
            raise ConfigurationError(f"tile phases must be pairwise distinct, got {phases}")
        object.__setattr__(self, "tile", tile)

    def entry(self, row: int, col: int):
        """The (class, phase) governing pixel (row, col)."""
        return self.tile[(row % 2) * 2 + (col % 2)]

    def class_positions(self, name: str):
        """Tile positions (r, c) in {0,1}^2 whose class is ``name``."""
        return [
            (i // 2, i % 2) for i, (cls, _) in enumerate(self.tile) if cls.name == name
        ]

    @property
    def max_duration_ticks(self) -> int:
        return max(cls.duration_ticks for cls, _ in self.tile)

    @property
    def max_phase_ticks(self) -> int:
        return max(phase for _, phase in self.tile)

    def rotated(self, quarter_turns: int) -> "SamplingPattern":
        """The pattern seen after rotating frames by 90deg * quarter_turns.

        np.rot90 maps source tile position (r, c) -> (1-c, r) for one
        counter-clockwise turn; rotating the video permutes which tile
        entry governs each output pixel.
        """
        k = quarter_turns % 4
        tile = self.tile
        for _ in range(k):
            # entry at output (r, c) comes from input (c, 1-r)
            tile = (tile[1], tile[3], tile[0], tile[2])
        return SamplingPattern(
            tile=tile, base_exposure_ticks=self.base_exposure_ticks, tick_ms=self.tick_ms
        )


# ---------------------------------------------------------------------------
# Camera model

@dataclass(frozen=True)
class CameraModel:
    """Response curve, well capacity, read noise and quantization depth.

    The response R maps integrated exposure in [0, inf) to codes in [0, 1],
    saturating at input 1.0.  The parametric default is a gamma curve
    R(x) = min(x, 1)^(1/gamma); an optional tabulated monotone curve
    (``crf_table``, shape (N, 2) of (exposure, code) pairs) overrides it.
    """

    gamma: float = 2.2
    full_well_electrons: float = 10000.0
    read_noise_electrons: float = 2.0
    bit_depth: int = 10
    crf_table: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.gamma <= 0:
            raise ConfigurationError("gamma must be positive")
        if self.full_well_electrons <= 0:
            raise ConfigurationError("full_well_electrons must be positive")
        if self.read_noise_electrons < 0:
            raise ConfigurationError("read_noise_electrons must be non-negative")
        if self.bit_depth <= 0:
            raise ConfigurationError("bit_depth must be positive")
        if self.crf_table is not None:
            tab = np.asarray(self.crf_table, dtype=float)
            if tab.ndim != 2 or tab.shape[1] != 2 or tab.shape[0] < 2:
                raise ConfigurationError("crf_table must have shape (N>=2, 2)")
            x, y = tab[:, 0], tab[:, 1]
            if np.any(np.diff(x) <= 0) or np.any(np.diff(y) < 0):
                raise ConfigurationError("crf_table must be strictly increasing in x, monotone in y")
            if x[0] != 0.0 or y[0] != 0.0 or x[-1] < 1.0 or abs(y[-1] - 1.0) > 1e-12:
                raise ConfigurationError("crf_table must map 0 -> 0 and reach 1 at x >= 1")
            tab.setflags(write=False)
            object.__setattr__(self, "crf_table", tab)

    @property
    def max_code(self) -> int:
        return (1 << self.bit_depth) - 1

    @property
    def saturation_code(self) -> float:
        """Codes at or above this are indistinguishable from clipping."""
        return 1.0 - 1.0 / (1 << self.bit_depth)

    def response(self, x: np.ndarray) -> np.ndarray:
        """R(x): exposure -> code, elementwise, saturating at x = 1."""
        x = np.asarray(x, dtype=float)
        if np.any(x < 0):
            raise ValidationError("response input must be non-negative")
        xs = np.minimum(x, 1.0)
        if self.crf_table is not None:
            return np.interp(xs, self.crf_table[:, 0], self.crf_table[:, 1])
        return xs ** (1.0 / self.gamma)

    def inverse_response(self, y: np.ndarray) -> np.ndarray:
        """R^-1(y): code -> exposure on [0, 1]; inverts ``response`` there."""
        y = np.asarray(y, dtype=float)
        if np.any(y < 0) or np.any(y > 1):
            raise ValidationError("inverse_response input must be in [0, 1]")
        if self.crf_table is not None:
            xs, ys = self.crf_table[:, 0], self.crf_table[:, 1]
            keep = np.minimum(xs, 1.0)
            return np.interp(y, ys, keep)
        return y ** self.gamma


# ---------------------------------------------------------------------------
# Transient signal model

@dataclass(frozen=True)
class TransientSignalModel:
    """A pulse with instantaneous rise and exponential fall over a baseline."""

    amplitude_A: float
    baseline_B: float
    tau_ms: float

    def __post_init__(self):
        if self.amplitude_A < 0:
            raise ConfigurationError("amplitude_A must be non-negative")
        if self.baseline_B < 0:
            raise ConfigurationError("baseline_B must be non-negative")
        if self.tau_ms <= 0:
            raise ConfigurationError("tau_ms must be positive")

    def value(self, t_ms) -> np.ndarray:
        """Signal value at time t (ms); bounded by A + B, onset at t = 0."""
        t = np.asarray(t_ms, dtype=float)
        out = np.full_like(t, self.baseline_B)
        pos = t >= 0
        out = np.where(pos, self.baseline_B + self.amplitude_A * np.exp(-np.clip(t, 0, None) / self.tau_ms), out)
        return out


# ---------------------------------------------------------------------------
# Metrics report

@dataclass
class MetricsReport:
    """Named scalar results plus the parameters that produced them."""

    entries: dict = field(default_factory=dict)

    def add(self, name: str, value: float, **params) -> None:
        self.entries[name] = (float(value), dict(params))

    def value(self, name: str) -> float:
        return self.entries[name][0]

    def to_text_table(self) -> str:
        width = max((len(n) for n in self.entries), default=6)
        lines = [f"{'metric'.ljust(width)}  value"]
        for name, (value, _) in self.entries.items():
            lines.append(f"{name.ljust(width)}  {value:.6g}")
        return "\n".join(lines) + "\n"

    def to_keyvalues(self) -> str:
        lines = []
        for name, (value, params) in self.entries.items():
            lines.append(f"{name}={value:.12g}")
            for key, val in params.items():
                lines.append(f"{name}.{key}={val}")
        return "\n".join(lines) + "\n"
