"""Tests for scene generators, dataset preparation, and HDR ingestion."""

import struct

import numpy as np
import pytest

import phasepix as px
from phasepix.core import ConfigurationError, ValidationError
from phasepix.scenes import downsample_half

PATTERN = px.SamplingPattern()
CAMERA = px.CameraModel()


class TestSceneSpecs:
    def test_unknown_kind(self):
        with pytest.raises(ConfigurationError):
            px.SceneSpec(kind="fireworks")

    def test_determinism(self):
        spec = px.SceneSpec(kind="hdr_composite", rows=32, cols=32, ticks=12)
        a = px.gen_scene(spec)
        b = px.gen_scene(spec)
        assert np.array_equal(a.data, b.data)


class TestLedPair:
    def test_onset_timing(self):
        spec = px.SceneSpec(
            kind="led_pair", rows=32, cols=32, ticks=24,
            params=dict(t0_tick=6, delay_ticks=3, intensity=1.0, ambient=0.1),
        )
        cube = px.gen_scene(spec)
        left, right = (16, 10), (16, 21)
        assert cube.data[left][5] == 0.1 and cube.data[left][6] == 1.1
        assert cube.data[right][8] == 0.1 and cube.data[right][9] == 1.1

    def test_on_ticks_limits_pulse(self):
        spec = px.SceneSpec(
            kind="led_pair", rows=32, cols=32, ticks=24,
            params=dict(t0_tick=6, delay_ticks=0, on_ticks=2, intensity=1.0),
        )
        cube = px.gen_scene(spec)
        s = cube.data[16, 10]
        assert s[6] == 1.0 and s[7] == 1.0 and s[8] == 0.0

    def test_background_stays_ambient(self):
        spec = px.SceneSpec(kind="led_pair", rows=32, cols=32, ticks=24,
                            params=dict(ambient=0.05))
        cube = px.gen_scene(spec)
        assert np.all(cube.data[0, 0] == 0.05)


class TestRotatingLetter:
    def test_letter_rotates(self):
        spec = px.SceneSpec(kind="rotating_letter", rows=48, cols=48, ticks=16,
                            params=dict(rpm=600.0))
        cube = px.gen_scene(spec)
        assert not np.array_equal(cube.frame(0), cube.frame(8))

    def test_zero_rpm_is_static(self):
        spec = px.SceneSpec(kind="rotating_letter", rows=48, cols=48, ticks=8,
                            params=dict(rpm=0.0))
        cube = px.gen_scene(spec)
        assert np.array_equal(cube.frame(0), cube.frame(7))

    def test_rotation_rate(self):
        # 2500 rpm at 1 ms ticks is 15 deg/tick: a quarter turn every 6 ticks
        spec = px.SceneSpec(kind="rotating_letter", rows=48, cols=48, ticks=8,
                            params=dict(rpm=2500.0, letter="H"))
        cube = px.gen_scene(spec)
        quarter = px.gen_scene(px.SceneSpec(
            kind="rotating_letter", rows=48, cols=48, ticks=8,
            params=dict(rpm=2500.0, letter="H", theta0_deg=90.0)))
        assert np.array_equal(cube.frame(6), quarter.frame(0))

    def test_hotspot_lifts_background_only(self):
        base = dict(rpm=0.0, ambient=0.1, letter_value=0.9)
        a = px.gen_scene(px.SceneSpec(kind="rotating_letter", rows=48, cols=48,
                                      ticks=4, params=base))
        b = px.gen_scene(px.SceneSpec(
            kind="rotating_letter", rows=48, cols=48, ticks=4,
            params=dict(base, hotspot=(24, 24, 4.0, 0.5))))
        changed = a.data != b.data
        assert changed.any()
        assert np.all(b.data[changed] == 0.5)    # only lifted, never dimmed
        assert np.all(b.data >= a.data)

    def test_unknown_letter(self):
        with pytest.raises(ConfigurationError):
            px.gen_scene(px.SceneSpec(kind="rotating_letter", params=dict(letter="Q")))

    def test_oversized_letter(self):
        with pytest.raises(ConfigurationError):
            px.gen_scene(px.SceneSpec(
                kind="rotating_letter", rows=16, cols=16,
                params=dict(letter_size=30.0, orbit=10.0)))


class TestSlantedEdgeScene:
    def test_static_and_bounded(self):
        cube = px.gen_scene(px.SceneSpec(kind="slanted_edge", ticks=4))
        assert np.array_equal(cube.frame(0), cube.frame(3))
        assert cube.data.min() == pytest.approx(0.1)
        assert cube.data.max() == pytest.approx(0.9)

    def test_coverage_is_exact_on_axis_aligned_edge(self):
        cube = px.gen_scene(px.SceneSpec(
            kind="slanted_edge", rows=8, cols=8, ticks=1,
            params=dict(angle_deg=0.0, offset_col=3.5, dark=0.0, bright=1.0)))
        frame = cube.frame(0)
        assert np.allclose(frame[:, :3], 0.0)
        assert np.allclose(frame[:, 4:], 1.0)
        # the edge splits the column-3/4 boundary exactly
        assert np.allclose(frame[:, 3], 0.0)


class TestHdrComposite:
    def test_irradiance_span(self):
        cube = px.gen_scene(px.SceneSpec(kind="hdr_composite", rows=64, cols=64,
                                         ticks=8))
        assert cube.data.min() == pytest.approx(0.01)
        assert cube.data.max() == pytest.approx(4.0)

    def test_bulb_pins_percentile(self):
        cube = px.gen_scene(px.SceneSpec(kind="hdr_composite", rows=64, cols=64,
                                         ticks=8))
        norm = px.normalize_hdr(cube)
        # the bulb disk covers more than 1% of the frame, so p99 = 4.0
        assert norm.data.max() == pytest.approx(1.0)
        assert np.isclose(np.percentile(cube.data, 99.0), 4.0)


class TestImpulse:
    def test_single_frame(self):
        cube = px.gen_scene(px.SceneSpec(kind="impulse", rows=8, cols=8, ticks=8,
                                         params=dict(tick=3, value=2.0)))
        assert np.all(cube.data[:, :, 3] == 2.0)
        assert cube.data.sum() == pytest.approx(2.0 * 64)

    def test_out_of_range_tick(self):
        with pytest.raises(ConfigurationError):
            px.gen_scene(px.SceneSpec(kind="impulse", ticks=8, params=dict(tick=9)))


class TestCropsAndAugmentation:
    def test_crop_count_and_origins(self):
        cube = px.VideoCube(np.zeros((8, 8, 8)), tick_ms=1.0)
        crops = px.crop_cubes(cube, size=(4, 4, 4), temporal_overlap=0.5)
        # 2x2 spatial tiles, temporal starts 0, 2, 4
        assert len(crops) == 12
        origins = {o for _, o in crops}
        assert (0, 0, 0) in origins and (4, 4, 4) in origins

    def test_crop_contents(self):
        rng = np.random.default_rng(8)
        cube = px.VideoCube(rng.uniform(0, 1, (8, 8, 8)), tick_ms=1.0)
        crop, (r0, c0, t0) = px.crop_cubes(cube, size=(4, 4, 4))[3]
        assert np.array_equal(crop.data, cube.data[r0:r0 + 4, c0:c0 + 4, t0:t0 + 4])

    def test_too_small_video(self):
        cube = px.VideoCube(np.zeros((4, 4, 4)), tick_ms=1.0)
        with pytest.raises(ValidationError):
            px.crop_cubes(cube, size=(8, 8, 4))

    def test_rotations(self):
        rng = np.random.default_rng(9)
        cube = px.VideoCube(rng.uniform(0, 1, (4, 4, 2)), tick_ms=1.0)
        items = px.augment_rotations([cube])
        assert len(items) == 4
        rot2 = items[2][0]
        assert np.array_equal(rot2.data, np.rot90(cube.data, 2, axes=(0, 1)))

    def test_rotated_pattern_tracks_rotated_video(self):
        # sampling the rotated video with the rotated pattern equals
        # rotating the measurement of the original
        rng = np.random.default_rng(10)
        cube = px.VideoCube(rng.uniform(0, 0.4, (8, 8, 16)), tick_ms=1.0)
        y = px.sample(cube, PATTERN, CAMERA, seed=None)
        for k in range(4):
            rot_video = cube.with_data(
                np.ascontiguousarray(np.rot90(cube.data, k, axes=(0, 1))))
            y_rot = px.sample(rot_video, PATTERN.rotated(k), CAMERA, seed=None)
            assert np.array_equal(
                y_rot.data, np.rot90(y.data, k, axes=(0, 1)))

    def test_non_square_rotation_rejected(self):
        cube = px.VideoCube(np.zeros((4, 6, 2)), tick_ms=1.0)
        with pytest.raises(ValidationError):
            px.augment_rotations([cube])


class TestDataset:
    def _video(self):
        spec = px.SceneSpec(kind="hdr_composite", rows=16, cols=16, ticks=16)
        return px.gen_scene(spec)

    def test_make_dataset_files_and_manifest(self, tmp_path):
        manifest = px.make_dataset(
            [self._video()], PATTERN, CAMERA, seed=5, out_dir=tmp_path,
            crop_size=(8, 8, 8),
        )
        assert len(manifest.records) == 12  # 2x2 spatial x 3 temporal (stride 4)
        rec = manifest.records[0]
        for slot in ("y_mea", "p"):
            assert (tmp_path / rec[slot]).exists()
        assert (tmp_path / "crop_00000_y_low.vcube").exists()
        back = px.DatasetManifest.load(tmp_path / "manifest.tsv")
        assert len(back.records) == len(manifest.records)
        assert back.records[0]["y_mea"] == rec["y_mea"]

    def test_dataset_is_reproducible(self, tmp_path):
        d1, d2 = tmp_path / "a", tmp_path / "b"
        px.make_dataset([self._video()], PATTERN, CAMERA, seed=5, out_dir=d1,
                        crop_size=(8, 8, 8))
        px.make_dataset([self._video()], PATTERN, CAMERA, seed=5, out_dir=d2,
                        crop_size=(8, 8, 8))
        for name in ("crop_00000_y_mea.vcube", "manifest.tsv"):
            assert (d1 / name).read_bytes() == (d2 / name).read_bytes()

    def test_ldr_targets_match_response(self, tmp_path):
        px.make_dataset([self._video()], PATTERN, CAMERA, seed=5, out_dir=tmp_path,
                        crop_size=(8, 8, 8))
        p = px.load_vcube(tmp_path / "crop_00000_p.vcube")
        mid = px.load_vcube(tmp_path / "crop_00000_y_mid.vcube")
        assert np.allclose(mid.data, CAMERA.response(4.0 * p.data.astype(np.float64)),
                           atol=1e-6)

    def test_augmented_dataset_tags_rotations(self, tmp_path):
        manifest = px.make_dataset(
            [self._video()], PATTERN, CAMERA, seed=5, out_dir=tmp_path,
            crop_size=(8, 8, 8), augment=True,
        )
        assert len(manifest.records) == 48
        tags = {r["augmentation"] for r in manifest.records}
        assert tags == {"rot0", "rot90", "rot180", "rot270"}

    def test_overwrite_protection(self, tmp_path):
        px.make_dataset([self._video()], PATTERN, CAMERA, seed=5, out_dir=tmp_path,
                        crop_size=(8, 8, 8))
        with pytest.raises(FileExistsError):
            px.make_dataset([self._video()], PATTERN, CAMERA, seed=5,
                            out_dir=tmp_path, crop_size=(8, 8, 8))

    def test_manifest_rejects_foreign_file(self, tmp_path):
        path = tmp_path / "manifest.tsv"
        path.write_text("just some text\n")
        with pytest.raises(ValidationError):
            px.DatasetManifest.load(path)


def _write_pfm(path, img, little_endian=True):
    h, w = img.shape
    with open(path, "wb") as fh:
        fh.write(b"Pf\n")
        fh.write(f"{w} {h}\n".encode())
        fh.write(b"-1.0\n" if little_endian else b"1.0\n")
        payload = img[::-1, :].astype("<f4" if little_endian else ">f4")
        fh.write(payload.tobytes())


class TestIngestion:
    def test_pfm_sequence(self, tmp_path):
        rng = np.random.default_rng(11)
        frames = [rng.uniform(0, 2, (6, 5)).astype(np.float32) for _ in range(3)]
        for i, frame in enumerate(frames):
            _write_pfm(tmp_path / f"f{i:03d}.pfm", frame)
        cube, clamped = px.ingest_hdr_sequence(tmp_path, tick_ms=0.5)
        assert cube.data.shape == (6, 5, 3)
        assert clamped == 0
        assert np.allclose(cube.data[:, :, 1], frames[1], atol=1e-6)

    def test_big_endian_pfm(self, tmp_path):
        frame = np.arange(30, dtype=np.float32).reshape(6, 5)
        _write_pfm(tmp_path / "f.pfm", frame, little_endian=False)
        cube, _ = px.ingest_hdr_sequence(tmp_path)
        assert np.allclose(cube.data[:, :, 0], frame)

    def test_negative_values_clamped_and_counted(self, tmp_path):
        frame = np.full((6, 5), -1.0, dtype=np.float32)
        frame[0, 0] = 2.0
        _write_pfm(tmp_path / "f.pfm", frame)
        cube, clamped = px.ingest_hdr_sequence(tmp_path)
        assert clamped == 29
        assert cube.data.min() == 0.0

    def test_mismatched_frames_rejected(self, tmp_path):
        _write_pfm(tmp_path / "a.pfm", np.zeros((4, 4), dtype=np.float32))
        _write_pfm(tmp_path / "b.pfm", np.zeros((5, 4), dtype=np.float32))
        with pytest.raises(ValidationError):
            px.ingest_hdr_sequence(tmp_path)

    def test_vcube_ingestion(self, tmp_path):
        cube = px.VideoCube(np.full((4, 4, 4), 0.5, dtype=np.float32), tick_ms=1.0)
        path = tmp_path / "c.vcube"
        px.save_vcube(cube, path)
        back, clamped = px.ingest_hdr_sequence(path, fmt="vcube")
        assert clamped == 0 and np.array_equal(back.data, cube.data)

    def test_empty_directory(self, tmp_path):
        with pytest.raises(ValidationError):
            px.ingest_hdr_sequence(tmp_path)

    def test_downsample_half(self):
        data = np.arange(16, dtype=float).reshape(4, 4)[:, :, None]
        cube = px.VideoCube(np.repeat(data, 2, axis=2), tick_ms=1.0)
        out = downsample_half(cube)
        assert out.data.shape == (2, 2, 2)
        assert out.data[0, 0, 0] == pytest.approx((0 + 1 + 4 + 5) / 4.0)
