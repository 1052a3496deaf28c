"""File interchange with the sensor-simulation toolchain.

The two packages share no code; they exchange `.vcube` files (a 32-byte
header followed by raw little-endian float32 data, row-major
(rows, cols, ticks)) and tab-separated dataset manifests.  This module
reimplements both formats from their on-disk definition so the training
side stays independently installable.
"""

from __future__ import annotations

import re
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

VCUBE_MAGIC = b"VCUB"
VCUBE_VERSION = 1

# magic | version | rows | cols | ticks | tick_us | reserved (8 bytes, zero)
_VCUBE_HEADER = struct.Struct("<4s5I8s")


class FormatError(ValueError):
    """The file is not a well-formed .vcube or manifest."""


class TruncationError(FormatError):
    """The payload is shorter than the header declares."""


class ValidationError(ValueError):
    """In-memory data violates a format precondition."""


@dataclass(frozen=True)
class Cube:
    """A (rows, cols, ticks) scalar field plus its tick duration."""

    data: np.ndarray
    tick_ms: float

    def __post_init__(self):
        if self.data.ndim != 3 or min(self.data.shape) < 1:
            raise ValidationError(f"cube data must be 3-D non-empty, got {self.data.shape}")
        if not np.isfinite(self.data).all():
            raise ValidationError("cube data must be finite")
        if self.tick_ms <= 0:
            raise ValidationError("tick_ms must be positive")

    def as_tchw(self) -> np.ndarray:
        """Return a (ticks, rows, cols) view for depth-first 3D convolutions."""
        return np.ascontiguousarray(np.moveaxis(self.data, 2, 0))

    @classmethod
    def from_tchw(cls, array: np.ndarray, tick_ms: float) -> "Cube":
        return cls(np.ascontiguousarray(np.moveaxis(array, 0, 2)), tick_ms)


def save_vcube(cube: Cube, path) -> None:
    """Write ``cube`` in the shared .vcube format (float32 payload)."""
    tick_us = int(round(cube.tick_ms * 1000))
    if tick_us < 1:
        raise ValidationError(f"tick_ms {cube.tick_ms} below the 1 us file resolution")
    payload = np.ascontiguousarray(cube.data, dtype="<f4")
    if not np.isfinite(payload).all():
        raise ValidationError("non-finite data after float32 conversion")
    rows, cols, ticks = cube.data.shape
    header = _VCUBE_HEADER.pack(
        VCUBE_MAGIC, VCUBE_VERSION, rows, cols, ticks, tick_us, b"\0" * 8
    )
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(payload.tobytes())


def load_vcube(path) -> Cube:
    """Read a .vcube file, verifying magic, dimensions and payload length."""
    raw = Path(path).read_bytes()
    if len(raw) < _VCUBE_HEADER.size:
        raise FormatError(f"{path}: file shorter than the 32-byte header")
    magic, version, rows, cols, ticks, tick_us, _ = _VCUBE_HEADER.unpack_from(raw)
    if magic != VCUBE_MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}")
    if version != VCUBE_VERSION:
        raise FormatError(f"{path}: unsupported version {version}")
    if min(rows, cols, ticks) < 1 or tick_us < 1:
        raise FormatError(f"{path}: invalid header fields")
    expected = 4 * rows * cols * ticks
    body = raw[_VCUBE_HEADER.size:]
    if len(body) != expected:
        raise TruncationError(
            f"{path}: payload is {len(body)} bytes, header declares {expected}"
        )
    data = np.frombuffer(body, dtype="<f4").reshape(rows, cols, ticks)
    if not np.isfinite(data).all():
        raise FormatError(f"{path}: payload contains non-finite values")
    return Cube(data=data.astype(np.float32), tick_ms=tick_us / 1000.0)


MANIFEST_FIELDS = (
    "y_mea", "p", "pattern_id", "camera_id", "origin_r", "origin_c", "origin_t",
    "augmentation",
)

# LDR target files sit next to the ground-truth file, named by gain slot
LDR_SLOTS = ("y_low", "y_mid", "y_high")


def load_manifest(path) -> list:
    """Parse a dataset manifest into a list of record dicts."""
    lines = Path(path).read_text().splitlines()
    if not lines or not lines[0].startswith("# phasepix dataset manifest"):
        raise FormatError(f"{path}: not a dataset manifest")
    if len(lines) < 2 or tuple(lines[1].split("\t")) != MANIFEST_FIELDS:
        raise FormatError(f"{path}: unexpected manifest columns")
    records = []
    for line in lines[2:]:
        if not line.strip():
            continue
        values = line.split("\t")
        if len(values) != len(MANIFEST_FIELDS):
            raise FormatError(f"{path}: malformed manifest row {line!r}")
        records.append(dict(zip(MANIFEST_FIELDS, values)))
    return records


def ldr_target_names(record: dict) -> dict:
    """Derive the three LDR target filenames from a record's ground-truth name."""
    p_name = record["p"]
    match = re.fullmatch(r"(.+)_p\.vcube", p_name)
    if not match:
        raise FormatError(f"cannot derive LDR target names from {p_name!r}")
    return {slot: f"{match.group(1)}_{slot}.vcube" for slot in LDR_SLOTS}


class CropDataset:
    """Random access to the (y_mea, p, LDR targets) file groups of a manifest."""

    def __init__(self, manifest_path):
        self.root = Path(manifest_path).parent
        self.records = load_manifest(manifest_path)
        if not self.records:
            raise ValidationError(f"{manifest_path}: manifest lists no crops")

    def __len__(self) -> int:
        return len(self.records)

    def load(self, index: int) -> dict:
        """Load one crop as float32 arrays in (ticks, rows, cols) order.

        Returns ``y_mea`` and ``p`` as (T, H, W) and ``targets`` as
        (3, T, H, W) stacking the low/mid/high exposure renderings.
        """
        rec = self.records[index]
        y_mea = load_vcube(self.root / rec["y_mea"])
        p = load_vcube(self.root / rec["p"])
        names = ldr_target_names(rec)
        targets = np.stack(
            [load_vcube(self.root / names[slot]).as_tchw() for slot in LDR_SLOTS]
        )
        return {
            "y_mea": y_mea.as_tchw(),
            "p": p.as_tchw(),
            "targets": targets,
            "tick_ms": y_mea.tick_ms,
        }
