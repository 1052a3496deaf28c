"""Tests for the domain types and the .vcube container."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import phasepix as px
from phasepix.core import (
    CLASS_GAINS,
    ConfigurationError,
    FormatError,
    TruncationError,
    ValidationError,
)


def _cube(shape=(4, 4, 3), fill=0.5, tick_ms=1.0):
    return px.VideoCube(np.full(shape, fill), tick_ms=tick_ms)


class TestVideoCube:
    def test_properties(self):
        c = _cube((4, 6, 3), tick_ms=0.5)
        assert (c.rows, c.cols, c.ticks) == (4, 6, 3)
        assert c.duration_ms == pytest.approx(1.5)
        assert c.frame(1).shape == (4, 6)

    def test_data_is_frozen(self):
        c = _cube()
        with pytest.raises(ValueError):
            c.data[0, 0, 0] = 1.0

    def test_with_data_keeps_timing(self):
        c = _cube(tick_ms=2.0)
        d = c.with_data(np.zeros((2, 2, 2)))
        assert d.tick_ms == 2.0 and d.rows == 2

    @pytest.mark.parametrize("bad", [
        np.zeros((4, 4)),            # not 3-D
        np.zeros((0, 4, 4)),         # empty axis
        np.full((2, 2, 2), np.nan),  # non-finite
    ])
    def test_rejects_bad_data(self, bad):
        with pytest.raises(ValidationError):
            px.VideoCube(bad, tick_ms=1.0)

    def test_rejects_bad_tick(self):
        with pytest.raises(ValidationError):
            px.VideoCube(np.zeros((2, 2, 2)), tick_ms=0.0)

    def test_allclose(self):
        a = _cube()
        assert a.allclose(a.with_data(a.data + 1e-12))
        assert not a.allclose(_cube(fill=0.6))


class TestVcubeIO:
    def test_roundtrip_bit_exact(self, tmp_path):
        rng = np.random.default_rng(0)
        cube = px.VideoCube(
            rng.uniform(0, 1, (5, 7, 3)).astype(np.float32), tick_ms=0.25
        )
        path = tmp_path / "a.vcube"
        px.save_vcube(cube, path)
        back = px.load_vcube(path)
        assert np.array_equal(back.data, cube.data)
        assert back.tick_ms == cube.tick_ms

    def test_save_is_deterministic(self, tmp_path):
        cube = _cube((3, 3, 3), fill=0.7)
        p1, p2 = tmp_path / "a.vcube", tmp_path / "b.vcube"
        px.save_vcube(cube, p1)
        px.save_vcube(cube, p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "bad.vcube"
        path.write_bytes(b"NOPE" + b"\0" * 40)
        with pytest.raises(FormatError):
            px.load_vcube(path)

    def test_truncated_payload(self, tmp_path):
        path = tmp_path / "t.vcube"
        px.save_vcube(_cube((2, 2, 2)), path)
        raw = path.read_bytes()
        path.write_bytes(raw[:-4])
        with pytest.raises(TruncationError):
            px.load_vcube(path)

    def test_short_header(self, tmp_path):
        path = tmp_path / "s.vcube"
        path.write_bytes(b"VC")
        with pytest.raises(FormatError):
            px.load_vcube(path)

    def test_sub_microsecond_tick_rejected(self, tmp_path):
        cube = px.VideoCube(np.zeros((2, 2, 2)), tick_ms=1e-5)
        with pytest.raises(ValidationError):
            px.save_vcube(cube, tmp_path / "x.vcube")

    @settings(max_examples=25, deadline=None)
    @given(
        rows=st.integers(1, 6), cols=st.integers(1, 6), ticks=st.integers(1, 6),
        tick_us=st.integers(1, 5000), seed=st.integers(0, 2**16),
    )
    def test_roundtrip_property(self, rows, cols, ticks, tick_us, seed):
        import tempfile
        from pathlib import Path

        rng = np.random.default_rng(seed)
        cube = px.VideoCube(
            rng.uniform(0, 10, (rows, cols, ticks)).astype(np.float32),
            tick_ms=tick_us / 1000.0,
        )
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "p.vcube"
            px.save_vcube(cube, path)
            back = px.load_vcube(path)
        assert np.array_equal(back.data, cube.data)
        assert back.tick_ms == pytest.approx(cube.tick_ms)


class TestSamplingPattern:
    def test_default_tile(self):
        pat = px.SamplingPattern()
        names = [cls.name for cls, _ in pat.tile]
        phases = [ph for _, ph in pat.tile]
        assert names == ["short", "mid", "mid", "long"]
        assert phases == [0, 1, 2, 3]
        assert pat.max_duration_ticks == 8
        assert pat.max_phase_ticks == 3

    def test_entry_tiles_periodically(self):
        pat = px.SamplingPattern()
        assert pat.entry(0, 0) == pat.entry(2, 4)
        assert pat.entry(1, 1)[0].name == "long"

    def test_class_positions(self):
        pat = px.SamplingPattern()
        assert pat.class_positions("mid") == [(0, 1), (1, 0)]
        assert pat.class_positions("short") == [(0, 0)]

    def test_gain_labels(self):
        for name, gain in CLASS_GAINS.items():
            assert px.ExposureClass(name, 4).gain_label == gain

    def test_rotation_matches_rot90(self):
        pat = px.SamplingPattern()
        for k in range(1, 5):
            rot = pat.rotated(k)
            for r in range(2):
                for c in range(2):
                    # np.rot90(frame, k)[r, c] == frame[src] with the same class
                    src = (r, c)
                    for _ in range(k):
                        src = (src[1], 1 - src[0])
                    assert rot.entry(r, c)[0].name == pat.entry(*src)[0].name
        assert pat.rotated(4).tile == pat.tile

    def test_rotation_consistent_with_numpy(self):
        # the class map rotated as an image equals the rotated pattern's map
        pat = px.SamplingPattern()
        grid = np.array([[pat.entry(r, c)[0].gain_label for c in range(2)]
                         for r in range(2)])
        for k in range(4):
            rot = np.rot90(grid, k)
            pat_k = pat.rotated(k)
            expect = np.array([[pat_k.entry(r, c)[0].gain_label for c in range(2)]
                               for r in range(2)])
            assert np.array_equal(rot, expect)

    @pytest.mark.parametrize("kwargs", [
        dict(base_exposure_ticks=0),
        dict(base_exposure_ticks=3),  # default tile needs an even base
        dict(tick_ms=0.0),
    ])
    def test_invalid_configuration(self, kwargs):
        with pytest.raises(ConfigurationError):
            px.SamplingPattern(**kwargs)

    def test_duplicate_phases_rejected(self):
        mid = px.ExposureClass("mid", 4)
        tile = ((mid, 0), (mid, 0), (mid, 2), (mid, 3))
        with pytest.raises(ConfigurationError):
            px.SamplingPattern(tile=tile)

    def test_unknown_class_rejected(self):
        with pytest.raises(ConfigurationError):
            px.ExposureClass("huge", 4)


class TestCameraModel:
    def test_gamma_roundtrip(self):
        cam = px.CameraModel()
        x = np.linspace(0, 1, 101)
        assert np.allclose(cam.inverse_response(cam.response(x)), x, atol=1e-12)

    def test_response_saturates(self):
        cam = px.CameraModel()
        assert cam.response(np.array([1.0, 1.5, 8.0])).tolist() == [1.0, 1.0, 1.0]

    def test_codes(self):
        cam = px.CameraModel()
        assert cam.max_code == 1023
        assert cam.saturation_code == pytest.approx(1.0 - 1.0 / 1024.0)

    def test_table_crf(self):
        table = np.column_stack([np.linspace(0, 1, 11), np.linspace(0, 1, 11) ** 0.5])
        cam = px.CameraModel(crf_table=table)
        x = table[:, 0]
        assert np.allclose(cam.inverse_response(cam.response(x)), x, atol=1e-12)

    def test_bad_table(self):
        with pytest.raises(ConfigurationError):
            px.CameraModel(crf_table=np.array([[0.0, 0.0], [0.5, 0.9]]))  # ends below 1

    @pytest.mark.parametrize("kwargs", [
        dict(gamma=0.0), dict(full_well_electrons=0.0),
        dict(read_noise_electrons=-1.0), dict(bit_depth=0),
    ])
    def test_invalid_parameters(self, kwargs):
        with pytest.raises(ConfigurationError):
            px.CameraModel(**kwargs)

    def test_response_rejects_negative(self):
        with pytest.raises(ValidationError):
            px.CameraModel().response(np.array([-0.1]))


class TestTransientSignalModel:
    def test_pulse_shape(self):
        m = px.TransientSignalModel(amplitude_A=2.0, baseline_B=1.0, tau_ms=3.0)
        assert m.value(-1.0) == 1.0
        assert m.value(0.0) == 3.0
        assert m.value(3.0) == pytest.approx(1.0 + 2.0 * np.exp(-1.0))
        t = np.linspace(-5, 20, 100)
        v = m.value(t)
        assert np.all(v >= 1.0) and np.all(v <= 3.0)

    def test_invalid(self):
        with pytest.raises(ConfigurationError):
            px.TransientSignalModel(amplitude_A=1.0, baseline_B=0.0, tau_ms=0.0)


class TestMetricsReport:
    def test_roundtrip(self):
        rep = px.MetricsReport()
        rep.add("psnr_db", 31.5, peak=1.0)
        assert rep.value("psnr_db") == 31.5
        text = rep.to_text_table()
        assert "psnr_db" in text and "31.5" in text
        kv = rep.to_keyvalues()
        assert "psnr_db=31.5" in kv and "psnr_db.peak=1.0" in kv
