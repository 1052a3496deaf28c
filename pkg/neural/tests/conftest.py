"""Shared fixtures: toy datasets rendered through the simulation CLI.

The training package exchanges data with the simulator through files
only, so every dataset here is produced by invoking the installed
``phasepix`` executable rather than importing it.
"""

import shutil
import subprocess
from pathlib import Path

import numpy as np
import pytest

from phasepix_neural.io import MANIFEST_FIELDS, Cube, save_vcube

GAMMA = 2.2


def run_phasepix(*args):
    proc = subprocess.run(
        ["phasepix", *[str(a) for a in args]],
        capture_output=True, text=True,
    )
    assert proc.returncode == 0, f"phasepix {args} failed:\n{proc.stderr}"
    return proc.stdout


@pytest.fixture(scope="session")
def toy_dataset(tmp_path_factory):
    """Static high-contrast scene: training crops plus a held-out measurement.

    Returns a dict with the dataset manifest, the ground-truth scene, a
    measurement of the same scene under an unseen noise seed, and the
    classical fused reconstruction of that measurement.
    """
    root = tmp_path_factory.mktemp("toy")
    scene = root / "scene.vcube"
    run_phasepix("gen-scene", "--kind", "hdr_composite", "--rows", 32,
                 "--cols", 32, "--ticks", 16, "--param", "rpm=0",
                 "--out", scene)
    run_phasepix("make-dataset", "--in", scene, "--seed", 3,
                 "--out-dir", root / "ds", "--crop-size", "16:16:8")
    held = root / "held.vcube"
    run_phasepix("simulate", "--in", scene, "--seed", 99, "--out", held)
    classical = root / "classical.vcube"
    run_phasepix("reconstruct", "--in", held, "--method", "fused",
                 "--out", classical)
    return {
        "root": root,
        "manifest": root / "ds" / "manifest.tsv",
        "scene": scene,
        "held": held,
        "classical": classical,
    }


@pytest.fixture(scope="session")
def led_overfit_manifest(tmp_path_factory):
    """Single-crop manifest of a moderate-range flashing-LED measurement.

    Rendered without HDR normalization so the medium-exposure reference
    stays inside the representable fusion range; the selected crop
    starts after every exposure window has completed once.
    """
    root = tmp_path_factory.mktemp("led")
    scene = root / "led.vcube"
    run_phasepix("gen-scene", "--kind", "led_pair", "--rows", 16,
                 "--cols", 16, "--ticks", 16, "--param", "intensity=0.45",
                 "--param", "ambient=0.05", "--out", scene)
    run_phasepix("make-dataset", "--in", scene, "--seed", 3,
                 "--out-dir", root / "ds", "--crop-size", "16:16:8",
                 "--no-normalize")
    lines = (root / "ds" / "manifest.tsv").read_text().splitlines()
    settled = [ln for ln in lines[2:] if ln.split("\t")[6] == "8"]
    assert settled, "expected a crop starting at tick 8"
    manifest = root / "ds" / "overfit.tsv"
    manifest.write_text("\n".join(lines[:2] + settled[:1]) + "\n")
    return manifest


@pytest.fixture(scope="session")
def constant_dataset(tmp_path_factory):
    """Noiseless constant scene at irradiance 0.1: one full-cube crop."""
    root = tmp_path_factory.mktemp("const")
    p = np.full((16, 16, 16), 0.1, dtype=np.float32)
    save_vcube(Cube(p, 1.0), root / "crop_00000_p.vcube")
    run_phasepix("simulate", "--in", root / "crop_00000_p.vcube",
                 "--no-normalize", "--out", root / "crop_00000_y_mea.vcube")
    for slot, gain in (("y_low", 2), ("y_mid", 4), ("y_high", 8)):
        y = np.minimum(gain * p, 1.0) ** (1.0 / GAMMA)
        save_vcube(Cube(y.astype(np.float32), 1.0),
                   root / f"crop_00000_{slot}.vcube")
    header = "# phasepix dataset manifest v1\n" + "\t".join(MANIFEST_FIELDS)
    row = "\t".join(["crop_00000_y_mea.vcube", "crop_00000_p.vcube",
                     "default", "default", "0", "0", "0", "rot0"])
    (root / "manifest.tsv").write_text(header + "\n" + row + "\n")
    return {"root": root, "manifest": root / "manifest.tsv"}


@pytest.fixture(scope="session")
def quick_checkpoints(led_overfit_manifest, tmp_path_factory):
    """Cheap narrow-model checkpoints for plumbing tests (not accuracy)."""
    from phasepix_neural import TrainConfig, train_hdr, train_ldr

    out = tmp_path_factory.mktemp("quick")
    cfg = TrainConfig(steps=10, width=4, batch_size=1, seed=0)
    ldr = train_ldr(led_overfit_manifest, cfg, out)
    hdr = train_hdr(led_overfit_manifest, ldr, cfg, out)
    return {"ldr": ldr, "hdr": hdr, "manifest": led_overfit_manifest}
