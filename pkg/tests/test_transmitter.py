"""Transmitter chain: bits, mapping, framing, shaping, laser, modulator, booster."""

import numpy as np
import pytest

from cponsim.constants import LIGHTSPEED, PLANCK
from cponsim.dsp import evm_db
from cponsim.field import SampledField, SpectralTransfer, apply_transfer, freq_axis, power_dbm
from cponsim.transmitter import (
    FrameLayout,
    LaserSpec,
    TxConfig,
    TxSeeds,
    boost,
    frame_symbols,
    gen_bits,
    iq_modulate,
    laser_field,
    qpsk_demap,
    qpsk_map,
    rrc_spectrum,
    shape_and_bandlimit,
    transmit,
)

BB = TxConfig()  # 30 GBd baseband, 21 GHz analog bandwidth
SSB = TxConfig(
    mode="ssb", f_if=-16.5e9, analog_bw_3db=42e9, modulator_output_dbm=-9.0
)


class TestBits:
    def test_deterministic(self):
        assert np.array_equal(gen_bits(1, 8), gen_bits(1, 8))

    def test_seed_changes_sequence(self):
        assert not np.array_equal(gen_bits(1, 64), gen_bits(2, 64))

    def test_mean_concentrates_at_half(self):
        # binomial: std of the mean at n=600k is ~6.5e-4, well inside 0.01
        bits = gen_bits(7, 600_000)
        assert abs(bits.mean() - 0.5) < 0.01

    def test_rejects_nonpositive(self):
        with pytest.raises(ValueError):
            gen_bits(1, 0)


class TestQpskMap:
    def test_declared_convention(self):
        s = qpsk_map(np.array([0, 0, 0, 1, 1, 1, 1, 0], dtype=np.uint8))
        r = np.sqrt(0.5)
        np.testing.assert_allclose(
            s, [r + 1j * r, -r + 1j * r, -r - 1j * r, r - 1j * r], atol=1e-15
        )

    def test_unit_mean_energy(self):
        s = qpsk_map(gen_bits(3, 4096))
        assert np.mean(np.abs(s) ** 2) == pytest.approx(1.0, abs=1e-12)

    def test_gray_property(self):
        # neighbors around the circle differ in exactly one bit
        order = [(0, 0), (0, 1), (1, 1), (1, 0)]
        for a, b in zip(order, order[1:] + order[:1]):
            assert sum(x != y for x, y in zip(a, b)) == 1
        pts = qpsk_map(np.array(sum(order, ()), dtype=np.uint8))
        angles = np.sort(np.angle(pts))
        assert np.allclose(np.diff(angles), np.pi / 2)

    def test_demap_inverts(self):
        bits = gen_bits(11, 2000)
        assert np.array_equal(qpsk_demap(qpsk_map(bits)), bits)

    def test_odd_length_errors(self):
        with pytest.raises(ValueError):
            qpsk_map(np.array([0, 1, 0], dtype=np.uint8))


class TestFrame:
    def test_layout_bookkeeping(self):
        lay = FrameLayout.design(2**18, 10000, 32)
        assert lay.total_symbols == 2**18
        assert lay.counted_bits >= 500_000
        pos = lay.pilot_positions()
        assert pos[0] == 10000
        assert np.all(np.diff(pos) == 33)
        overlap = np.intersect1d(pos, lay.payload_positions())
        assert overlap.size == 0

    def test_frame_symbols_place_payload(self):
        lay = FrameLayout.design(4096, 256, 32)
        fr = frame_symbols(lay, TxSeeds())
        got = qpsk_demap(fr.sym_x[lay.payload_positions()])
        assert np.array_equal(got, fr.bits_x)

    def test_polarizations_independent(self):
        lay = FrameLayout.design(4096, 256, 32)
        fr = frame_symbols(lay, TxSeeds())
        assert not np.array_equal(fr.bits_x, fr.bits_y)
        assert not np.array_equal(fr.preamble_x, fr.preamble_y)


class TestShaping:
    def test_occupied_bandwidth_33ghz(self):
        lay = FrameLayout.design(4096, 256, 32)
        fr = frame_symbols(lay, TxSeeds())
        drive = shape_and_bandlimit(fr.sym_x, fr.sym_y, BB, analog=False)
        f = freq_axis(drive.n_samples, drive.sample_rate)
        psd = np.abs(np.fft.fft(drive.ex)) ** 2
        # average over 64-bin blocks to tame periodogram noise
        blocks = psd.reshape(-1, 64).mean(axis=1)
        fb = f.reshape(-1, 64).mean(axis=1)
        occupied = fb[blocks > blocks.max() * 1e-2]
        width = occupied.max() - occupied.min()
        assert width == pytest.approx(33e9, rel=0.03)

    def test_matched_cascade_is_isi_free(self):
        lay = FrameLayout.design(2048, 128, 32)
        fr = frame_symbols(lay, TxSeeds())
        drive = shape_and_bandlimit(fr.sym_x, fr.sym_y, BB, analog=False)
        h = SpectralTransfer(
            lambda fr_: rrc_spectrum(fr_, BB.symbol_rate, BB.rolloff).astype(np.complex128)
        )
        matched = apply_transfer(drive, h)
        samples = matched.ex[:: BB.sim_sps]
        assert evm_db(samples, fr.sym_x) < -50

    def test_analog_response_is_3db_at_band_edge(self):
        n = 1 << 14
        imp = np.zeros(n // BB.sim_sps, dtype=np.complex128)
        imp[0] = 1.0
        flat_cfg = TxConfig(rolloff=0.999)  # wide RRC so the Gaussian dominates at 21 GHz
        with_analog = shape_and_bandlimit(imp, imp, flat_cfg, analog=True)
        without = shape_and_bandlimit(imp, imp, flat_cfg, analog=False)
        f = freq_axis(with_analog.n_samples, with_analog.sample_rate)
        k21 = np.argmin(np.abs(f - 21e9))
        ratio = np.abs(np.fft.fft(with_analog.ex))[k21] / np.abs(np.fft.fft(without.ex))[k21]
        assert 20 * np.log10(ratio) == pytest.approx(-3.0, abs=0.1)


class TestLaser:
    def test_zero_linewidth_constant_phase(self):
        cw = laser_field(LaserSpec(16.0, 0.0, 0.0, 1), 4096, 480e9)
        assert np.ptp(np.angle(cw.ex)) < 1e-12

    def test_power_setpoint(self):
        cw = laser_field(LaserSpec(16.0, 1e6, 0.0, 1), 1 << 16, 480e9)
        assert power_dbm(cw) == pytest.approx(16.0, abs=1e-9)

    def test_wiener_increment_variance(self):
        # oracle: var of phase increments must be 2*pi*linewidth/fs
        fs, n = 480e9, 1 << 20
        cw = laser_field(LaserSpec(16.0, 1e6, 0.0, 2), n, fs)
        dphi = np.angle(cw.ex[1:] * np.conj(cw.ex[:-1]))
        expected = 2 * np.pi * 1e6 / fs
        assert np.var(dphi) == pytest.approx(expected, rel=0.05)

    def test_detuning_moves_the_line(self):
        fs, n = 480e9, 1 << 14
        cw = laser_field(LaserSpec(16.0, 0.0, 25e9, 3), n, fs)
        f = freq_axis(n, fs)
        peak = f[np.argmax(np.abs(np.fft.fft(cw.ex)))]
        assert peak == pytest.approx(25e9, abs=fs / n)


class TestModulator:
    def _drive(self, cfg, n_sym=2048):
        lay = FrameLayout.design(n_sym, 128, 32)
        fr = frame_symbols(lay, TxSeeds())
        return shape_and_bandlimit(fr.sym_x, fr.sym_y, cfg)

    def test_baseband_output_power(self):
        drive = self._drive(BB)
        cw = laser_field(LaserSpec(16.0, 1e6, 0.0, 1), drive.n_samples, drive.sample_rate)
        out = iq_modulate(cw, drive, BB)
        assert power_dbm(out) == pytest.approx(-8.0, abs=0.01)

    def test_ssb_subcarrier_placement(self):
        drive = self._drive(SSB)
        cw = laser_field(LaserSpec(16.0, 1e6, 0.0, 1), drive.n_samples, drive.sample_rate)
        out = iq_modulate(cw, drive, SSB)
        f = freq_axis(out.n_samples, out.sample_rate)
        psd = (np.abs(np.fft.fft(out.ex)) ** 2 + np.abs(np.fft.fft(out.ey)) ** 2)
        blocks = psd.reshape(-1, 16).mean(axis=1)
        fb = f.reshape(-1, 16).mean(axis=1)
        occ = fb[blocks > blocks.max() * 1e-2]
        midpoint = 0.5 * (occ.min() + occ.max())
        assert midpoint == pytest.approx(-16.5e9, abs=0.2e9)

    def test_ssb_centroid_without_analog_tilt(self):
        lay = FrameLayout.design(2048, 128, 32)
        fr = frame_symbols(lay, TxSeeds())
        drive = shape_and_bandlimit(fr.sym_x, fr.sym_y, SSB, analog=False)
        f = freq_axis(drive.n_samples, drive.sample_rate)
        psd = np.abs(np.fft.fft(drive.ex)) ** 2 + np.abs(np.fft.fft(drive.ey)) ** 2
        centroid = np.sum(f * psd) / np.sum(psd)
        assert centroid == pytest.approx(-16.5e9, abs=0.2e9)

    def test_ssb_energy_single_sided(self):
        drive = self._drive(SSB)
        cw = laser_field(LaserSpec(16.0, 1e6, 0.0, 1), drive.n_samples, drive.sample_rate)
        out = iq_modulate(cw, drive, SSB)
        f = freq_axis(out.n_samples, out.sample_rate)
        psd = np.abs(np.fft.fft(out.ex)) ** 2 + np.abs(np.fft.fft(out.ey)) ** 2
        lower = psd[f < 0].sum()
        assert lower / psd.sum() > 0.99

    def test_zero_drive_sentinel(self):
        z = np.zeros(4096, dtype=np.complex128)
        drive = SampledField(z, z, BB.sim_rate)
        cw = laser_field(LaserSpec(16.0, 1e6, 0.0, 1), 4096, BB.sim_rate)
        out = iq_modulate(cw, drive, BB)
        assert power_dbm(out) == float("-inf")


class TestBooster:
    def _field(self, dbm, n=1 << 16, seed=0):
        rng = np.random.default_rng(seed)
        ex = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        ey = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        from cponsim.field import set_power

        return set_power(SampledField(ex, ey, 480e9), dbm)

    def test_gain_reaches_launch(self):
        out = boost(self._field(-8.0), BB, 1560.06e-9, seed=1)
        # ASE adds a little on top of the 0 dBm signal
        assert power_dbm(out) == pytest.approx(0.0, abs=0.05)

    def test_zero_nf_near_unity_gain_adds_no_noise(self):
        # transparent limit: S_ASE ~ (G*F - 1) -> 0 as G -> 1 with F = 1
        cfg = TxConfig(booster_nf_db=0.0)
        f = self._field(-1e-4)
        out = boost(f, cfg, 1560.06e-9, seed=1)
        g = 10 ** (1e-4 / 20)
        added = np.mean(np.abs(out.ex - f.ex * g) ** 2)
        assert added < 1e-8 * np.mean(np.abs(f.ex) ** 2)

    def test_ase_psd_matches_closed_form(self):
        # oracle: periodogram estimate of the added noise vs (h nu/2)(GF-1)
        wavelength = 1560.06e-9
        cfg = TxConfig()  # NF 7 dB, launch 0 dBm
        f = self._field(-8.0, n=1 << 20, seed=2)
        out = boost(f, cfg, wavelength, seed=3)
        g = 10 ** (8.0 / 20)
        noise = out.ex - f.ex * g
        measured_psd = np.mean(np.abs(noise) ** 2) / 480e9
        nu = LIGHTSPEED / wavelength
        expected = 0.5 * PLANCK * nu * (10 ** (8 / 10) * 10 ** (7 / 10) - 1.0)
        assert measured_psd == pytest.approx(expected, rel=0.05)

    def test_input_above_launch_errors(self):
        with pytest.raises(ValueError):
            boost(self._field(0.5), BB, 1560.06e-9, seed=1)


def test_transmit_deterministic():
    lay = FrameLayout.design(2048, 128, 32)
    laser = LaserSpec(16.0, 1e6, 5e9, (1, 2))
    a, _ = transmit(BB, lay, TxSeeds(), laser, 1560.06e-9)
    b, _ = transmit(BB, lay, TxSeeds(), laser, 1560.06e-9)
    assert np.array_equal(a.ex, b.ex) and np.array_equal(a.ey, b.ey)
    assert power_dbm(a) == pytest.approx(0.0, abs=0.05)
