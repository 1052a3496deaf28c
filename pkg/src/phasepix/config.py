"""Text configuration files for sampling patterns and camera models.

Both file kinds use one `key = value` pair per line; blank lines and
lines starting with '#' are ignored.  Keys are case-sensitive.

Pattern file keys:
    tile                  comma list of four class names, row-major 2x2
    phases                comma list of four phase offsets in ticks
    base_exposure_ticks   medium-class duration (default 4)
    tick_us               tick duration in microseconds (default 1000)

Camera file keys:
    gamma, full_well, read_noise, bit_depth
    crf_table             path to a two-column CSV (x, R(x)) overriding gamma
"""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .core import (
    CameraModel,
    ConfigurationError,
    ExposureClass,
    SamplingPattern,
)

_CLASS_DURATION_FACTOR = {"short": 0.5, "mid": 1.0, "long": 2.0}


def parse_keyvalues(path) -> dict:
    """Read a key=value file into a string dict."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc}") from exc
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigurationError(f"{path}:{lineno}: expected key = value")
        key, _, value = line.partition("=")
        key = key.strip()
        if key in out:
            raise ConfigurationError(f"{path}:{lineno}: duplicate key {key!r}")
        out[key] = value.strip()
    return out


def _get(kv, key, default, convert, path):
    if key not in kv:
        if default is None:
            raise ConfigurationError(f"{path}: missing required key {key!r}")
        return default
    try:
        return convert(kv.pop(key))
    except ValueError as exc:
        raise ConfigurationError(f"{path}: bad value for {key!r}: {exc}") from exc


def load_pattern_config(path) -> SamplingPattern:
    kv = parse_keyvalues(path)
    names = [s.strip() for s in kv.pop("tile", "short,mid,mid,long").split(",")]
    base = _get(kv, "base_exposure_ticks", 4, int, path)
    quarter = max(base // 4, 1)
    default_phases = ",".join(str(k * quarter) for k in range(4))
    phase_str = kv.pop("phases", default_phases)
    try:
        phases = [int(s) for s in phase_str.split(",")]
    except ValueError as exc:
        raise ConfigurationError(f"{path}: bad phases {phase_str!r}") from exc
    tick_us = _get(kv, "tick_us", 1000, int, path)
    if kv:
        raise ConfigurationError(f"{path}: unknown keys {sorted(kv)}")
    if len(names) != 4 or len(phases) != 4:
        raise ConfigurationError(f"{path}: tile and phases need 4 entries each")
    tile = []
    for name, phase in zip(names, phases):
        if name not in _CLASS_DURATION_FACTOR:
            raise ConfigurationError(f"{path}: unknown class {name!r}")
        duration = _CLASS_DURATION_FACTOR[name] * base
        if duration != int(duration):
            raise ConfigurationError(
                f"{path}: base_exposure_ticks={base} gives non-integer "
                f"duration for class {name!r}"
            )
        tile.append((ExposureClass(name=name, duration_ticks=int(duration)), phase))
    return SamplingPattern(
        tile=tuple(tile), base_exposure_ticks=base, tick_ms=tick_us / 1000.0
    )


def _load_crf_table(path):
    try:
        with open(path, newline="") as fh:
            rows = [r for r in csv.reader(fh) if r]
    except OSError as exc:
        raise ConfigurationError(f"cannot read CRF table {path}: {exc}") from exc
    if rows and not rows[0][0].replace(".", "", 1).lstrip("-").isdigit():
        rows = rows[1:]  # header line
    try:
        x = np.array([float(r[0]) for r in rows])
        y = np.array([float(r[1]) for r in rows])
    except (ValueError, IndexError) as exc:
        raise ConfigurationError(f"{path}: CRF table needs two numeric columns") from exc
    return np.column_stack([x, y])


def load_camera_config(path) -> CameraModel:
    kv = parse_keyvalues(path)
    gamma = _get(kv, "gamma", 2.2, float, path)
    full_well = _get(kv, "full_well", 10000.0, float, path)
    read_noise = _get(kv, "read_noise", 2.0, float, path)
    bit_depth = _get(kv, "bit_depth", 10, int, path)
    table = None
    if "crf_table" in kv:
        table_path = kv.pop("crf_table")
        base = Path(path).parent
        table = _load_crf_table(base / table_path if not Path(table_path).is_absolute()
                                else table_path)
    if kv:
        raise ConfigurationError(f"{path}: unknown keys {sorted(kv)}")
    return CameraModel(
        gamma=gamma,
        full_well_electrons=full_well,
        read_noise_electrons=read_noise,
        bit_depth=bit_depth,
        crf_table=table,
    )


def write_pattern_config(pattern: SamplingPattern, path) -> None:
    lines = [
        "tile = " + ",".join(cls.name for cls, _ in pattern.tile),
        "phases = " + ",".join(str(ph) for _, ph in pattern.tile),
        f"base_exposure_ticks = {pattern.base_exposure_ticks}",
        f"tick_us = {int(round(pattern.tick_ms * 1000))}",
    ]
    Path(path).write_text("\n".join(lines) + "\n")


def write_camera_config(camera: CameraModel, path) -> None:
    lines = [
        f"gamma = {camera.gamma}",
        f"full_well = {camera.full_well_electrons}",
        f"read_noise = {camera.read_noise_electrons}",
        f"bit_depth = {camera.bit_depth}",
    ]
    Path(path).write_text("\n".join(lines) + "\n")
