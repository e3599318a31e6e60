"""Dual-polarization QPSK transmitter chain.

Covers bit generation, Gray mapping, framing (preamble / pilot / payload),
root-raised-cosine shaping with the analog front-end bandwidth limit, the
laser model (Wiener phase noise plus deterministic detuning), IQ modulation
(baseband or single-sideband around a digital subcarrier), and the booster
EDFA that enforces the launch power while adding ASE.

Everything is seed-deterministic: the same seeds and config produce a
bit-identical field.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np

from . import kernels
from .constants import LIGHTSPEED, PLANCK
from .field import SampledField, freq_axis, power_dbm, set_power, total_power

MODE_BASEBAND = "baseband"
MODE_SSB = "ssb"

_SQRT_HALF = np.sqrt(0.5)


@dataclass(frozen=True)
class LaserSpec:
    """CW laser: power, Lorentzian linewidth, detuning from the channel center."""

    power_dbm: float = 16.0
    linewidth_hz: float = 1e6
    detuning_hz: float = 0.0
    seed: tuple | int = 0

    def __post_init__(self):
        if self.linewidth_hz < 0:
            raise ValueError("linewidth must be non-negative")


@dataclass(frozen=True)
class TxConfig:
    """Transmitter electrical/optical parameters for one direction."""

    symbol_rate: float = 30e9
    rolloff: float = 0.1
    mode: str = MODE_BASEBAND
    f_if: float = 0.0  # subcarrier offset from the laser, SSB mode only
    analog_bw_3db: float = 21e9
    modulator_output_dbm: float = -8.0
    booster_nf_db: float = 7.0
    launch_dbm: float = 0.0
    sim_sps: int = 16

    def __post_init__(self):
        if not 0.0 < self.rolloff < 1.0:
            raise ValueError("rolloff must be in (0, 1)")
        if self.analog_bw_3db <= 0:
            raise ValueError("analog bandwidth must be positive")
        if self.mode == MODE_SSB and self.f_if == 0.0:
            raise ValueError("SSB mode requires a non-zero f_if")

    @property
    def sim_rate(self) -> float:
        return self.symbol_rate * self.sim_sps


@dataclass(frozen=True)
class FrameLayout:
    """Geometry of one burst: preamble, pilot-interleaved payload, filler.

    The stream is ``preamble | (pilot + pilot_period payload) * n_blocks |
    trailing pilot | filler``.  Payload bits are counted across both
    polarizations (2 bits per symbol per polarization).
    """

    preamble_len: int
    pilot_period: int
    n_blocks: int
    filler: int

    @classmethod
    def design(cls, total_symbols: int, preamble_len: int, pilot_period: int) -> "FrameLayout":
        body = total_symbols - preamble_len - 1
        if body < pilot_period + 1:
            raise ValueError("frame too short for the requested preamble")
        n_blocks = body // (pilot_period + 1)
        filler = body - n_blocks * (pilot_period + 1)
        return cls(preamble_len, pilot_period, n_blocks, filler)

    @property
    def total_symbols(self) -> int:
        return self.preamble_len + self.n_blocks * (self.pilot_period + 1) + 1 + self.filler

    @property
    def payload_symbols(self) -> int:
        return self.n_blocks * self.pilot_period

    @property
    def counted_bits(self) -> int:
        return 4 * self.payload_symbols

    def pilot_positions(self) -> np.ndarray:
        return self.preamble_len + np.arange(self.n_blocks + 1) * (self.pilot_period + 1)

    def payload_positions(self) -> np.ndarray:
        starts = self.preamble_len + 1 + np.arange(self.n_blocks) * (self.pilot_period + 1)
        return (starts[:, None] + np.arange(self.pilot_period)[None, :]).ravel()


@dataclass(frozen=True)
class TxSeeds:
    """Independent RNG streams for one transmitter."""

    bits_x: tuple | int = 0
    bits_y: tuple | int = 1
    preamble_x: tuple | int = 2
    preamble_y: tuple | int = 3
    pilots_x: tuple | int = 4
    pilots_y: tuple | int = 5
    laser: tuple | int = 6
    ase: tuple | int = 7


@dataclass(frozen=True)
class FrameSymbols:
    """Transmitted symbol streams plus the reference data the receiver knows."""

    layout: FrameLayout
    sym_x: np.ndarray
    sym_y: np.ndarray
    bits_x: np.ndarray
    bits_y: np.ndarray
    preamble_x: np.ndarray = dc_field(repr=False, default=None)
    preamble_y: np.ndarray = dc_field(repr=False, default=None)
    pilots_x: np.ndarray = dc_field(repr=False, default=None)
    pilots_y: np.ndarray = dc_field(repr=False, default=None)


def _rng(seed) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed))


def gen_bits(seed, n: int) -> np.ndarray:
    """Seeded pseudo-random bit sequence of length n."""
    if n <= 0:
        raise ValueError("n must be positive")
    return _rng(seed).integers(0, 2, size=n, dtype=np.uint8)


def qpsk_map(bits: np.ndarray) -> np.ndarray:
    """Gray-map bit pairs (b1, b0) to unit-energy QPSK symbols.

    (0,0) -> (+1+j)/sqrt2, (0,1) -> (-1+j)/sqrt2, (1,1) -> (-1-j)/sqrt2,
    (1,0) -> (+1-j)/sqrt2.
    """
    if bits.size % 2:
        raise ValueError("bit count must be even")
    b1 = bits[0::2].astype(np.float64)
    b0 = bits[1::2].astype(np.float64)
    return _SQRT_HALF * ((1.0 - 2.0 * b0) + 1j * (1.0 - 2.0 * b1))


def qpsk_demap(symbols: np.ndarray) -> np.ndarray:
    """Hard-decision inverse of :func:`qpsk_map`."""
    bits = np.empty(symbols.size * 2, dtype=np.uint8)
    bits[0::2] = symbols.imag < 0
    bits[1::2] = symbols.real < 0
    return bits


def _random_qpsk(seed, n: int) -> np.ndarray:
    return qpsk_map(gen_bits(seed, 2 * n))


def frame_symbols(layout: FrameLayout, seeds: TxSeeds) -> FrameSymbols:
    """Build the per-polarization symbol streams for one burst."""
    n_payload = layout.payload_symbols
    bits_x = gen_bits(seeds.bits_x, 2 * n_payload)
    bits_y = gen_bits(seeds.bits_y, 2 * n_payload)
    pre_x = _random_qpsk(seeds.preamble_x, layout.preamble_len)
    pre_y = _random_qpsk(seeds.preamble_y, layout.preamble_len)
    pil_x = _random_qpsk(seeds.pilots_x, layout.n_blocks + 1 + layout.filler)
    pil_y = _random_qpsk(seeds.pilots_y, layout.n_blocks + 1 + layout.filler)

    sym_x = np.empty(layout.total_symbols, dtype=np.complex128)
    sym_y = np.empty(layout.total_symbols, dtype=np.complex128)
    sym_x[: layout.preamble_len] = pre_x
    sym_y[: layout.preamble_len] = pre_y
    ppos = layout.pilot_positions()
    sym_x[ppos] = pil_x[: ppos.size]
    sym_y[ppos] = pil_y[: ppos.size]
    dpos = layout.payload_positions()
    sym_x[dpos] = qpsk_map(bits_x)
    sym_y[dpos] = qpsk_map(bits_y)
    if layout.filler:
        tail = layout.total_symbols - layout.filler
        sym_x[tail:] = pil_x[ppos.size :]
        sym_y[tail:] = pil_y[ppos.size :]
    return FrameSymbols(
        layout, sym_x, sym_y, bits_x, bits_y,
        pre_x, pre_y, pil_x[: ppos.size], pil_y[: ppos.size],
    )


def rrc_spectrum(f: np.ndarray, symbol_rate: float, rolloff: float) -> np.ndarray:
    """Root-raised-cosine amplitude response, unit gain in the flat region."""
    af = np.abs(f)
    f1 = (1.0 - rolloff) * symbol_rate / 2.0
    f2 = (1.0 + rolloff) * symbol_rate / 2.0
    h = np.zeros_like(af)
    h[af <= f1] = 1.0
    trans = (af > f1) & (af < f2)
    h[trans] = np.sqrt(
        0.5 * (1.0 + np.cos(np.pi / (rolloff * symbol_rate) * (af[trans] - f1)))
    )
    return h


def gaussian_lowpass(f: np.ndarray, bw_3db: float) -> np.ndarray:
    """Gaussian magnitude response with -3 dB (power) point at bw_3db."""
    return np.exp(-0.5 * np.log(2.0) * (f / bw_3db) ** 2)


def shape_and_bandlimit(
    sym_x: np.ndarray, sym_y: np.ndarray, cfg: TxConfig, analog: bool = True
) -> SampledField:
    """RRC-shape the symbol streams and apply the analog bandwidth limit.

    In SSB mode the drive is centered on the digital subcarrier ``f_if``;
    the analog response always acts on the physical (post-shift) waveform.
    The shaping is done on a circular grid at ``sim_sps`` samples/symbol.
    """
    sps = cfg.sim_sps
    n = sym_x.size * sps
    f = freq_axis(n, cfg.sim_rate)
    mask = rrc_spectrum(f, cfg.symbol_rate, cfg.rolloff)
    if analog:
        # equivalent to shifting first and filtering around 0
        mask = mask * gaussian_lowpass(f + cfg.f_if, cfg.analog_bw_3db)

    def one_pol(sym):
        spec = np.tile(np.fft.fft(sym), sps) * mask
        return np.fft.ifft(spec)

    ex, ey = one_pol(sym_x), one_pol(sym_y)
    out = SampledField(ex, ey, cfg.sim_rate)
    if cfg.mode == MODE_SSB:
        # grid-snapped subcarrier shift keeps the record exactly periodic
        bins = round(cfg.f_if * n / cfg.sim_rate)
        dphi = 2.0 * np.pi * bins / n
        out = SampledField(
            kernels.phase_ramp_mul(out.ex, dphi),
            kernels.phase_ramp_mul(out.ey, dphi),
            cfg.sim_rate,
            bins * cfg.sim_rate / n,
        )
    return out


def laser_field(spec: LaserSpec, n_samples: int, sample_rate: float) -> SampledField:
    """Single-polarization CW wave with Wiener phase noise and detuning.

    Phase increments have variance ``2*pi*linewidth/sample_rate``; the
    detuning is a deterministic ramp.  Same spec (incl. seed) -> same wave.
    """
    amp = np.sqrt(10.0 ** (spec.power_dbm / 10.0) * 1e-3)
    if spec.linewidth_hz > 0.0:
        sigma = np.sqrt(2.0 * np.pi * spec.linewidth_hz / sample_rate)
        inc = _rng(spec.seed).standard_normal(n_samples) * sigma
    else:
        inc = np.zeros(n_samples)
    # detuning snapped to the record grid (sub-bin residual ~0.1 MHz)
    bins = round(spec.detuning_hz * n_samples / sample_rate)
    dphi = 2.0 * np.pi * bins / n_samples
    wave = kernels.laser_wave(inc, dphi, amp)
    return SampledField(wave, np.zeros_like(wave), sample_rate, bins * sample_rate / n_samples)


def iq_modulate(cw: SampledField, drive: SampledField, cfg: TxConfig) -> SampledField:
    """Imprint the drive envelope on the CW carrier.

    The output power is pinned to ``cfg.modulator_output_dbm`` regardless of
    laser power; modulation loss is absorbed into that set-point.  The CW
    phase/frequency process (noise + detuning) transfers onto the signal.
    """
    if cw.n_samples != drive.n_samples or cw.sample_rate != drive.sample_rate:
        raise ValueError("cw and drive grids must match")
    # the CW wave has constant amplitude; normalize by its first sample
    carrier = cw.ex * (1.0 / np.abs(cw.ex[0]))
    out = SampledField(
        drive.ex * carrier,
        drive.ey * carrier,
        drive.sample_rate,
        drive.center_offset + cw.center_offset,
    )
    if total_power(out) == 0.0:
        return out  # zero drive: zero-power sentinel
    return set_power(out, cfg.modulator_output_dbm)


def boost(field: SampledField, cfg: TxConfig, wavelength: float, seed) -> SampledField:
    """Booster EDFA: gain up to the launch power plus ASE.

    Per-polarization ASE PSD is ``(h*nu/2) * (G*F - 1)`` [W/Hz] with G the
    linear gain and F the linear noise figure, integrated over the
    simulation band.
    """
    p_in = power_dbm(field)
    if p_in >= cfg.launch_dbm:
        raise ValueError("booster input already at/above launch power; use a VOA")
    gain_db = cfg.launch_dbm - p_in
    g_lin = 10.0 ** (gain_db / 10.0)
    f_lin = 10.0 ** (cfg.booster_nf_db / 10.0)
    nu = LIGHTSPEED / wavelength
    s_ase = max(0.0, 0.5 * PLANCK * nu * (g_lin * f_lin - 1.0))
    amp = np.sqrt(g_lin)
    ex = field.ex * amp
    ey = field.ey * amp
    if s_ase > 0.0:
        sigma_q = np.sqrt(s_ase * field.sample_rate / 2.0)
        rng = _rng(seed)
        for pol in (ex, ey):
            noise = rng.standard_normal(2 * field.n_samples).view(np.complex128)
            noise *= sigma_q
            pol += noise
    return field.with_samples(ex, ey)


def transmit(
    cfg: TxConfig,
    layout: FrameLayout,
    seeds: TxSeeds,
    laser: LaserSpec,
    wavelength: float,
) -> tuple[SampledField, FrameSymbols]:
    """Full transmitter: frame -> shaping -> laser -> modulator -> booster."""
    frame = frame_symbols(layout, seeds)
    drive = shape_and_bandlimit(frame.sym_x, frame.sym_y, cfg)
    cw = laser_field(laser, drive.n_samples, drive.sample_rate)
    modulated = iq_modulate(cw, drive, cfg)
    launched = boost(modulated, cfg, wavelength, seeds.ase)
    return launched, frame
