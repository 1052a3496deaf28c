"""Tests for spectral analysis, PSF spectra, and the SNR model."""

import numpy as np
import pytest

import phasepix as px
from phasepix import analysis
from phasepix.core import ConfigurationError, ValidationError


def _req(grid=None, **kw):
    if grid is None:
        grid = np.linspace(0.0, 2.0, 128)
    return px.SpectrumRequest(T_E_ms=4.0, freq_grid_khz=grid, **kw)


class TestExposureSpectrum:
    def test_dc_value(self):
        assert px.exposure_spectrum(4.0, 0.0) == pytest.approx(4.0)

    def test_zeros_at_harmonics(self):
        f = np.array([0.25, 0.5, 0.75])  # multiples of 1/T_E
        assert np.allclose(np.abs(px.exposure_spectrum(4.0, f)), 0.0, atol=1e-12)

    def test_magnitude_is_sinc(self):
        f = np.linspace(0, 1, 50)
        mag = np.abs(px.exposure_spectrum(4.0, f))
        assert np.allclose(mag, 4.0 * np.abs(np.sinc(4.0 * f)), atol=1e-12)


class TestMultiPhaseSpectra:
    def test_phase_index_validation(self):
        with pytest.raises(ValidationError):
            px.phase_pixel_spectrum(_req(), 0)
        with pytest.raises(ValidationError):
            px.phase_pixel_spectrum(_req(), 5)

    def test_single_phase_has_replica_at_sampling_rate(self):
        # an individual pixel aliases: replica at f = 1/T_E has DC weight
        req = _req(grid=np.array([0.0, 0.25]))
        mags = np.abs(px.phase_pixel_spectrum(req, 1))
        assert mags[1] == pytest.approx(mags[0], rel=1e-9)

    def test_average_cancels_low_replicas(self):
        req = _req(grid=np.array([0.25, 0.5, 0.75]))
        avg = np.abs(px.averaged_spectrum(req))
        assert np.all(avg < 1e-12)

    def test_average_keeps_fourth_replica(self):
        req = _req(grid=np.array([0.0, 1.0]))  # 4/T_E = 1 kHz
        avg = np.abs(px.averaged_spectrum(req))
        assert avg[1] == pytest.approx(avg[0], rel=1e-9)

    def test_average_equals_closed_form(self):
        req = _req()
        a = px.averaged_spectrum(req)
        b = px.averaged_spectrum_closed_form(req)
        assert np.max(np.abs(a - b)) < 1e-12 * np.abs(b).max()

    def test_closed_form_requires_four_phases(self):
        with pytest.raises(ConfigurationError):
            px.averaged_spectrum_closed_form(_req(num_phases=2))

    def test_grid_validation(self):
        with pytest.raises(ValidationError):
            _req(grid=np.array([1.0, 0.5]))


class TestPsfSpectra:
    def test_zeros_at_inverse_length(self):
        for L in (2, 4, 8):
            f = np.arange(1, 4) / L
            assert np.allclose(px.psf_spectrum(L, f), 0.0, atol=1e-12)

    def test_short_kernel_passes_more(self):
        f = np.linspace(0.01, 0.12, 20)
        assert np.all(px.psf_spectrum(2, f) > px.psf_spectrum(8, f))

    def test_invalid_length(self):
        with pytest.raises(ConfigurationError):
            px.psf_spectrum(3, np.array([0.1]))

    def test_average_survives_single_kernel_zeros(self):
        # frequencies nulled by the longer kernels stay alive in the average
        # because the short kernel still passes them
        f = np.array([0.125, 0.25, 0.375])  # zeros of the 8L (and 4L) kernels
        avg = px.averaged_psf_spectrum(f)
        assert np.all(avg > 0.01)
        assert px.averaged_psf_spectrum(np.array([0.0]))[0] == pytest.approx(1.0)


class TestSnrModel:
    def test_closed_form_value(self):
        m = px.TransientSignalModel(amplitude_A=10.0, baseline_B=1.0, tau_ms=1.0)
        T = 2.0
        s = 10.0 * (1.0 - np.exp(-2.0))
        assert px.snr_value(m, T) == pytest.approx(s * s / (s + 2.0 * 2.0))

    def test_curve_and_argmax(self):
        m = px.TransientSignalModel(amplitude_A=10.0, baseline_B=1.0, tau_ms=1.2)
        curve = px.snr_curve(m, np.linspace(0.2, 20.0, 200))
        assert curve.argmax_ms == pytest.approx(
            float(curve.exposures_ms[np.argmax(curve.snr)]))
        # interior peak: strictly below both ends of the grid
        assert 0.2 < curve.argmax_ms < 20.0

    def test_optimal_exposure_interior(self):
        m = px.TransientSignalModel(amplitude_A=10.0, baseline_B=1.0, tau_ms=1.2)
        t_star, interior = px.optimal_exposure(m, 0.2, 20.0)
        assert interior
        # stationarity of the closed form at the reported optimum
        eps = 1e-4
        up = px.snr_value(m, t_star + eps)
        down = px.snr_value(m, t_star - eps)
        assert px.snr_value(m, t_star) >= max(up, down) - 1e-9

    def test_optimal_exposure_monotone_case_hits_boundary(self):
        # no baseline: SNR grows with exposure, optimum pegs the upper bound
        m = px.TransientSignalModel(amplitude_A=10.0, baseline_B=0.0, tau_ms=1.0)
        t_star, interior = px.optimal_exposure(m, 0.2, 20.0)
        assert not interior and t_star == 20.0

    def test_argmax_scales_with_tau(self):
        stars = []
        for tau in (0.6, 1.2, 2.4):
            m = px.TransientSignalModel(amplitude_A=10.0, baseline_B=1.0, tau_ms=tau)
            t_star, _ = px.optimal_exposure(m, 0.01, 50.0)
            stars.append(t_star)
        ratios = np.array(stars) / np.array([0.6, 1.2, 2.4])
        # the optimum is a fixed multiple of tau for fixed A/B
        assert np.allclose(ratios, ratios[0], rtol=1e-4)

    def test_degenerate_signal_rejected(self):
        with pytest.raises(ConfigurationError):
            px.snr_value(
                px.TransientSignalModel(amplitude_A=0.0, baseline_B=0.0, tau_ms=1.0),
                1.0,
            )

    def test_grid_validation(self):
        m = px.TransientSignalModel(amplitude_A=1.0, baseline_B=1.0, tau_ms=1.0)
        with pytest.raises(ValidationError):
            px.snr_curve(m, np.array([1.0, 1.0]))


class TestCsvWriters:
    def test_spectrum_csv(self, tmp_path):
        path = tmp_path / "s.csv"
        analysis.write_spectrum_csv(path, np.array([0.0, 0.5]), np.array([1.0, 0.2]))
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "frequency_kHz,magnitude"
        assert len(lines) == 3

    def test_snr_csv_marks_argmax(self, tmp_path):
        m = px.TransientSignalModel(amplitude_A=10.0, baseline_B=1.0, tau_ms=1.0)
        curve = px.snr_curve(m, np.linspace(0.5, 10.0, 20))
        path = tmp_path / "snr.csv"
        analysis.write_snr_csv(path, curve)
        rows = path.read_text().strip().splitlines()[1:]
        flags = [int(r.split(",")[2]) for r in rows]
        assert sum(flags) == 1
