"""Tests for the command-line front end."""

import numpy as np
import pytest

from phasepix_neural.cli import main
from phasepix_neural.io import Cube, load_vcube, save_vcube


class TestTrainCommands:
    def test_train_ldr(self, led_overfit_manifest, tmp_path, capsys):
        code = main([
            "train-ldr", "--manifest", str(led_overfit_manifest),
            "--out-dir", str(tmp_path), "--steps", "3", "--width", "4",
            "--seed", "1",
        ])
        assert code == 0
        assert (tmp_path / "ldr_net.pt").exists()
        assert (tmp_path / "ldr_loss.csv").exists()
        assert "checkpoint=" in capsys.readouterr().out
        log = (tmp_path / "ldr_run.log").read_text()
        assert "subcommand=train-ldr" in log
        assert "seed=1" in log and "steps=3" in log

    def test_train_hdr(self, led_overfit_manifest, tmp_path):
        assert main([
            "train-ldr", "--manifest", str(led_overfit_manifest),
            "--out-dir", str(tmp_path), "--steps", "3", "--width", "4",
        ]) == 0
        assert main([
            "train-hdr", "--manifest", str(led_overfit_manifest),
            "--out-dir", str(tmp_path), "--steps", "3", "--width", "4",
            "--ldr-checkpoint", str(tmp_path / "ldr_net.pt"),
        ]) == 0
        assert (tmp_path / "hdr_net.pt").exists()
        assert (tmp_path / "hdr_loss.csv").exists()

    def test_train_reruns_identical(self, led_overfit_manifest, tmp_path):
        for sub in ("a", "b"):
            assert main([
                "train-ldr", "--manifest", str(led_overfit_manifest),
                "--out-dir", str(tmp_path / sub), "--steps", "4",
                "--width", "4", "--seed", "9",
            ]) == 0
        assert ((tmp_path / "a" / "ldr_loss.csv").read_bytes()
                == (tmp_path / "b" / "ldr_loss.csv").read_bytes())

    def test_missing_manifest_fails(self, tmp_path, capsys):
        code = main([
            "train-ldr", "--manifest", str(tmp_path / "nope.tsv"),
            "--out-dir", str(tmp_path), "--steps", "1", "--width", "4",
        ])
        assert code == 1
        assert "error: train-ldr:" in capsys.readouterr().err


class TestInferCommand:
    def test_infer_writes_output_and_log(self, quick_checkpoints, tmp_path,
                                         capsys):
        rng = np.random.default_rng(0)
        y = tmp_path / "y.vcube"
        save_vcube(Cube(rng.uniform(0, 1, (16, 16, 8)).astype(np.float32), 1.0), y)
        out = tmp_path / "fused.vcube"
        code = main([
            "infer", "--in", str(y),
            "--ldr-checkpoint", str(quick_checkpoints["ldr"]),
            "--hdr-checkpoint", str(quick_checkpoints["hdr"]),
            "--out", str(out),
        ])
        assert code == 0
        assert load_vcube(out).data.shape == (16, 16, 8)
        assert "fused=" in capsys.readouterr().out
        assert "subcommand=infer" in (tmp_path / "fused.vcube.log").read_text()

    def test_infer_bad_dims_exits_nonzero(self, quick_checkpoints, tmp_path,
                                          capsys):
        y = tmp_path / "y.vcube"
        save_vcube(Cube(np.zeros((16, 16, 10), dtype=np.float32), 1.0), y)
        code = main([
            "infer", "--in", str(y),
            "--ldr-checkpoint", str(quick_checkpoints["ldr"]),
            "--hdr-checkpoint", str(quick_checkpoints["hdr"]),
            "--out", str(tmp_path / "fused.vcube"),
        ])
        assert code == 1
        assert "pad" in capsys.readouterr().err


class TestUsageErrors:
    def test_missing_subcommand(self):
        with pytest.raises(SystemExit) as exc:
            main([])
        assert exc.value.code == 2

    def test_missing_required_argument(self):
        with pytest.raises(SystemExit) as exc:
            main(["train-ldr", "--steps", "1"])
        assert exc.value.code == 2
