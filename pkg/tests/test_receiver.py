"""Receiver front end: mixing, calibrated noise, analog bandwidth, AGC/ADC."""

import numpy as np
import pytest

from cponsim.field import SampledField, freq_axis, power_dbm, set_power, total_power
from cponsim.receiver import (
    BracketError,
    NoiseCalibration,
    RxConfig,
    add_rx_noise,
    agc_adc,
    calibrate_noise,
    coherent_mix,
    load_calibration,
    make_rx_noise,
    quantize_uniform,
    rx_analog,
    save_calibration,
)
from cponsim.transmitter import FrameLayout, LaserSpec, TxConfig, TxSeeds, frame_symbols, shape_and_bandlimit

FS = 480e9


def cw_field(linewidth, seed, n=1 << 16, detuning=0.0, fs=FS):
    from cponsim.transmitter import laser_field

    return laser_field(LaserSpec(0.0, linewidth, detuning, seed), n, fs)


def rx_cfg(**kw):
    defaults = dict(
        lo=LaserSpec(16.0, 0.0, 0.0, 99),
        analog_bw_3db=22.5e9,
        adc_bits=6,
        adc_sps=2,
        agc_clip_factor=3.0,
    )
    defaults.update(kw)
    return RxConfig(**defaults)


class TestCoherentMix:
    def test_zero_linewidths_constant_rotation(self):
        sig = cw_field(0.0, 1, n=4096)
        out = coherent_mix(sig, LaserSpec(16.0, 0.0, 0.0, 2))
        assert np.ptp(np.angle(out.ex)) < 1e-12

    def test_lo_detuning_shifts_spectrum_down(self):
        sig = cw_field(0.0, 1, n=4096, detuning=0.0)
        out = coherent_mix(sig, LaserSpec(16.0, 0.0, 1e9, 2))
        f = freq_axis(4096, FS)
        peak = f[np.argmax(np.abs(np.fft.fft(out.ex)))]
        assert peak == pytest.approx(-1e9, abs=FS / 4096)

    def test_combined_linewidth_doubles_wiener_variance(self):
        # oracle: independent Wiener processes add their increment variances
        n = 1 << 20
        sig = cw_field(1e6, 11, n=n)
        out = coherent_mix(sig, LaserSpec(16.0, 1e6, 0.0, 22))
        dphi = np.angle(out.ex[1:] * np.conj(out.ex[:-1]))
        assert np.var(dphi) == pytest.approx(2 * np.pi * 2e6 / FS, rel=0.05)

    def test_power_preserved(self):
        sig = cw_field(1e6, 5)
        out = coherent_mix(sig, LaserSpec(16.0, 1e6, 0.0, 6))
        assert total_power(out) == pytest.approx(total_power(sig), rel=1e-12)


class TestRxNoise:
    def test_zero_psd_identity(self):
        f = cw_field(0.0, 1, n=1024)
        assert add_rx_noise(f, 0.0, 7) is f

    def test_measured_power_matches_psd(self):
        # per-quadrature power over the band must be psd * fs within 2%
        n, psd = 1 << 20, 3e-19
        nx, ny = make_rx_noise(n, FS, psd, 13)
        for quad in (nx.real, nx.imag, ny.real, ny.imag):
            assert np.mean(quad**2) == pytest.approx(psd * FS, rel=0.02)

    def test_doubling_psd_adds_3db(self):
        n = 1 << 18
        a, _ = make_rx_noise(n, FS, 1e-19, 5)
        b, _ = make_rx_noise(n, FS, 2e-19, 5)
        ratio = 10 * np.log10(np.mean(np.abs(b) ** 2) / np.mean(np.abs(a) ** 2))
        assert ratio == pytest.approx(3.01, abs=0.1)


class TestAnalogFrontEnd:
    def test_3db_point(self):
        n = 1 << 14
        rng = np.random.default_rng(0)
        f = SampledField(
            rng.standard_normal(n) + 1j * rng.standard_normal(n),
            np.zeros(n, dtype=np.complex128),
            FS,
        )
        out = rx_analog(f, 22.5e9)
        fr = freq_axis(n, FS)
        h = np.abs(np.fft.fft(out.ex) / np.fft.fft(f.ex))
        k = np.argmin(np.abs(fr - 22.5e9))
        assert 20 * np.log10(h[k]) == pytest.approx(-3.0, abs=0.05)


class TestAgcAdc:
    def test_full_scale_sine_sqnr(self):
        # oracle: 6.02*bits + 1.76 dB for a full-scale sine
        n = 1 << 16
        x = np.sin(2 * np.pi * np.arange(n) * 0.1234567)
        q = quantize_uniform(x, 1.0, 6)
        sqnr = 10 * np.log10(np.mean(x**2) / np.mean((q - x) ** 2))
        assert sqnr == pytest.approx(37.9, abs=0.5)

    def test_quantizer_symmetry(self):
        x = np.random.default_rng(3).standard_normal(10000)
        np.testing.assert_allclose(
            quantize_uniform(-x, 1.0, 6), -quantize_uniform(x, 1.0, 6), atol=1e-15
        )

    def _qpsk_2sps(self, seed, n_sym=4096, power=1e-3):
        cfg = TxConfig(sim_sps=2, analog_bw_3db=1e12)
        fr = frame_symbols(FrameLayout.design(n_sym, 128, 32), TxSeeds(*[(seed, i) for i in range(8)]))
        drive = shape_and_bandlimit(fr.sym_x, fr.sym_y, cfg, analog=False)
        return set_power(drive, 10 * np.log10(power / 1e-3))

    def test_bypass_equals_normalized_input(self):
        f = self._qpsk_2sps(1)
        cfg = rx_cfg(adc_bits=None)
        out = agc_adc(f, cfg, 30e9)
        # bypass mode: output proportional to input, unit-full-scale normalized
        ratio = out.ex / f.ex
        assert np.allclose(ratio, ratio[0])
        assert out.sample_rate == 60e9

    def test_agc_invariance_to_input_scale(self):
        f = self._qpsk_2sps(2)
        cfg = rx_cfg(agc_clip_factor=4.0)
        a = agc_adc(f, cfg, 30e9)
        g = f.with_samples(f.ex * 8.0, f.ey * 8.0)  # power-of-two: exact fp scaling
        b = agc_adc(g, cfg, 30e9)
        np.testing.assert_array_equal(a.ex, b.ex)
        np.testing.assert_array_equal(a.ey, b.ey)

    def test_leak_degrades_effective_quantization_snr(self):
        # two-run comparison: a -30 dB-isolated leak 8 dB above the signal
        # costs measurable quantization SNR on the desired signal
        sig = self._qpsk_2sps(4, power=1e-6)
        leak_raw = self._qpsk_2sps(5, power=10 ** (0.8) * 1e-6)
        from cponsim.field import frequency_shift

        leak = frequency_shift(leak_raw, 20e9, check_aliasing=False)

        def qsnr(total_field):
            comp = np.concatenate([total_field.ex, total_field.ey])
            sigma_q = np.sqrt(np.mean(np.abs(comp) ** 2) / 2.0)
            fs = 3.0 * sigma_q
            err = 0.0
            p_sig = np.mean(np.abs(sig.ex) ** 2 + np.abs(sig.ey) ** 2)
            for part_t, part_s in ((total_field.ex, sig.ex), (total_field.ey, sig.ey)):
                q = quantize_uniform(part_t.real, fs, 6) + 1j * quantize_uniform(part_t.imag, fs, 6)
                err += np.mean(np.abs(q - part_t) ** 2)
            return 10 * np.log10(p_sig / err)

        clean = qsnr(sig)
        loaded = qsnr(sig.with_samples(sig.ex + leak.ex, sig.ey + leak.ey))
        assert clean - loaded > 0.1

    def test_zero_input_errors(self):
        z = np.zeros(4096, dtype=np.complex128)
        with pytest.raises(ValueError):
            agc_adc(SampledField(z, z, 60e9), rx_cfg(), 30e9)

    def test_non_integer_decimation_errors(self):
        f = self._qpsk_2sps(6)
        with pytest.raises(ValueError):
            agc_adc(f, rx_cfg(), 19e9)


class TestCalibration:
    @staticmethod
    def _synthetic_ber(psd0):
        def ber(psd):
            return min(0.5, 0.02 * (psd / psd0) ** 1.5)

        return ber

    def test_converges_to_target(self):
        cal = calibrate_noise(self._synthetic_ber(1e-19), 1e-20, 4e-19)
        assert abs(cal.achieved_ber - 0.02) <= 0.002
        assert cal.noise_psd == pytest.approx(1e-19, rel=0.1)

    def test_deterministic(self):
        a = calibrate_noise(self._synthetic_ber(2e-19), 1e-20, 4e-19)
        b = calibrate_noise(self._synthetic_ber(2e-19), 1e-20, 4e-19)
        assert a.noise_psd == b.noise_psd

    def test_expands_bracket_when_needed(self):
        cal = calibrate_noise(self._synthetic_ber(1e-19), 5e-19, 9e-19)
        assert abs(cal.achieved_ber - 0.02) <= 0.002

    def test_zero_ber_chain_reports_brackets(self):
        with pytest.raises(BracketError) as exc:
            calibrate_noise(lambda psd: 0.0, 1e-20, 1e-19)
        assert exc.value.ber_hi == 0.0

    def test_cache_round_trip(self, tmp_path):
        path = tmp_path / "calib.txt"
        cal = NoiseCalibration(3.21e-19, -38.0, 0.0199)
        save_calibration(path, "abc123", cal)
        save_calibration(path, "def456", NoiseCalibration(1e-19, -38.0, 0.02))
        got = load_calibration(path, "abc123")
        assert got == cal
        assert load_calibration(path, "zzz") is None
        assert load_calibration(tmp_path / "missing.txt", "abc123") is None
