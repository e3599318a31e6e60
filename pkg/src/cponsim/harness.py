"""Scenario composition, calibration, threshold search, penalty sweeps.

Builds the three coexistence architectures (dual-channel with diplexers,
single-channel with two lasers, single-channel with one laser and digital
subcarriers), runs the downstream chain, bisects the VOA attenuation to the
2% pre-FEC BER threshold, and reports loss-budget penalties against a
flat-filter no-leak reference.

The chain from transmitter to receiver input is linear in the VOA gain, so
budget searches precompute the signal, leak, and noise components once at
the ADC rate and rescale the signal per bisection step; ``run_once`` keeps
the straight-line composition and the two paths agree to floating-point
reordering (covered by tests).
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field as dc_field, replace
from typing import Callable

import numpy as np

from .dsp import DspConfig, DspResult, dsp_receive
from .field import SampledField, frequency_shift, power_dbm, set_power, truncate_spectrum
from .plant import (
    CouplerSpec,
    FiberSpec,
    FilterProfile,
    FAMILY_FLAT,
    FAMILY_GAUSSIAN,
    FAMILY_SUPERGAUSSIAN,
    beta2_beta3,
    couple,
    fiber_transfer,
    filter_transfer,
    load_filter_profile,
    ssmf_propagate,
    voa,
    wdm_assemble,
)
from .field import apply_transfer
from .receiver import (
    NoiseCalibration,
    RxConfig,
    adc_sample,
    agc_adc,
    agc_quantize,
    calibrate_noise,
    coherent_mix,
    load_calibration,
    make_rx_noise,
    rx_analog,
    save_calibration,
)
from . import kernels
from .transmitter import (
    FrameLayout,
    FrameSymbols,
    LaserSpec,
    MODE_BASEBAND,
    MODE_SSB,
    TxConfig,
    TxSeeds,
    gaussian_lowpass,
    laser_field,
    transmit,
)

ARCH_DUAL = "dual-channel"
ARCH_TWO_LASER = "single-two-laser"
ARCH_ONE_LASER = "single-one-laser"
ARCHITECTURES = (ARCH_DUAL, ARCH_TWO_LASER, ARCH_ONE_LASER)

FILTER_GAUSS60 = "gaussian-60"
FILTER_SMOOTH80 = "smooth-80"
FILTER_SHARP80 = "sharp-80"
FILTER_FLAT = "flat"
FILTERS = (FILTER_GAUSS60, FILTER_SMOOTH80, FILTER_SHARP80)

# seed-stream indices: transmitters 0..3, then receiver-side streams
TX_CENTER, TX_NEIGH_LO, TX_NEIGH_HI, TX_UPSTREAM = 0, 1, 2, 3
_LO_STREAM, _RXNOISE_STREAM = 4, 5


@dataclass(frozen=True)
class SimParams:
    """All numeric parameters of the study; defaults reproduce the headline setup."""

    symbol_rate: float = 30e9
    sim_sps: int = 16
    n_symbols: int = 2**18
    preamble_len: int = 10000
    pilot_period: int = 32
    rolloff: float = 0.1

    lambda_n: float = 1560.06e-9
    grid_hz: float = 100e9
    filter_il_db: float = 3.5
    gauss_bw: float = 60e9
    flattop_bw: float = 80e9
    order_smooth: float = 2.0
    order_sharp: float = 4.0

    trunk_km: float = 30.0
    trunk_alpha: float = 0.2
    d_ref: float = 16.3
    slope: float = 0.056
    pon_km: float = 20.0

    coupler_il_db: float = 1.0
    isolation_db: float = 30.0

    laser_power_dbm: float = 16.0  # per laser; the shared 19 dBm laser splits to 16
    linewidth_hz: float = 1e6
    tx_bw_baseband: float = 21e9
    rx_bw_baseband: float = 22.5e9
    tx_bw_ssb: float = 42e9  # doubled front-end bandwidth for the subcarrier config
    rx_bw_ssb: float = 45e9
    mod_out_baseband_dbm: float = -8.0
    mod_out_ssb_dbm: float = -9.0
    booster_nf_db: float = 7.0
    launch_dbm: float = 0.0
    f_if: float = 16.5e9

    adc_bits: int | None = 6
    adc_sps: int = 2
    agc_clip_factor: float = 7.0

    sensitivity_dbm: float = -38.0
    target_ber: float = 0.02
    ber_tol: float = 0.002

    eq_taps: int = 15
    cpr_window: int = 5

    voa_lo_db: float = 20.0
    voa_hi_db: float = 45.0
    budget_tol_db: float = 0.02
    min_counted_bits: int = 500_000
    # adjacent 100 GHz channels are present in every study scenario; the
    # ideal-channel identity check disables them (with unbounded analog
    # bandwidth they would alias through the ADC by construction)
    neighbors_enabled: bool = True

    @property
    def sim_rate(self) -> float:
        return self.symbol_rate * self.sim_sps

    @property
    def n_samples(self) -> int:
        return self.n_symbols * self.sim_sps

    def layout(self) -> FrameLayout:
        return FrameLayout.design(self.n_symbols, self.preamble_len, self.pilot_period)

    def trunk_fiber(self) -> FiberSpec:
        return FiberSpec(self.trunk_km, self.trunk_alpha, self.d_ref, self.slope, lossless=False)

    def pon_fiber(self) -> FiberSpec:
        return FiberSpec(self.pon_km, self.trunk_alpha, self.d_ref, self.slope, lossless=True)

    def fixed_path_loss_db(self) -> float:
        """Deterministic in-band losses of the reference chain (MUX+DEMUX, trunk, coupler)."""
        return 2.0 * self.filter_il_db + self.trunk_alpha * self.trunk_km + self.coupler_il_db


DEFAULT_PARAMS = SimParams()


@dataclass(frozen=True)
class FrequencyPlan:
    """Laser and subcarrier placement for one scenario.

    Worst-case deterministic detunings: outward for the two-laser plan,
    toward the occupied sideband's filter edge for the shared-laser plan,
    positive for dual-channel (symmetric filters make the sign immaterial
    there).
    """

    ds_laser_offset: float
    us_laser_offset: float
    ds_if: float
    us_if: float

    @property
    def lo_offset(self) -> float:
        return self.ds_laser_offset


def build_plan(architecture: str, f_acc: float, params: SimParams) -> FrequencyPlan:
    if f_acc < 0:
        raise ValueError("f_acc must be non-negative")
    if architecture == ARCH_DUAL:
        return FrequencyPlan(f_acc, 0.0, 0.0, 0.0)
    if architecture == ARCH_TWO_LASER:
        off = params.f_if + f_acc
        return FrequencyPlan(-off, +off, 0.0, 0.0)
    if architecture == ARCH_ONE_LASER:
        return FrequencyPlan(-f_acc, -f_acc, -params.f_if, +params.f_if)
    raise ValueError(f"unknown architecture {architecture!r}")


@dataclass(frozen=True)
class Scenario:
    architecture: str
    filter_key: str
    f_acc: float
    seed_set: int
    params: SimParams = DEFAULT_PARAMS
    leak_enabled: bool = True

    def __post_init__(self):
        if self.architecture not in ARCHITECTURES:
            raise ValueError(f"unknown architecture {self.architecture!r}")

    @property
    def plan(self) -> FrequencyPlan:
        return build_plan(self.architecture, self.f_acc, self.params)


def build_scenario(
    architecture: str,
    filter_key: str,
    f_acc: float,
    seed_set: int,
    params: SimParams = DEFAULT_PARAMS,
    leak: bool | None = None,
) -> Scenario:
    """Validated scenario; circulator leakage defaults to on for single-channel."""
    filter_profile(filter_key, params)  # validates the key
    leak_enabled = (architecture != ARCH_DUAL) if leak is None else leak
    if architecture == ARCH_DUAL:
        leak_enabled = False
    return Scenario(architecture, filter_key, f_acc, seed_set, params, leak_enabled)


def filter_profile(key: str, params: SimParams) -> FilterProfile:
    if key == FILTER_GAUSS60:
        return FilterProfile(FAMILY_GAUSSIAN, params.gauss_bw, 1.0, params.filter_il_db)
    if key == FILTER_SMOOTH80:
        return FilterProfile(
            FAMILY_SUPERGAUSSIAN, params.flattop_bw, params.order_smooth, params.filter_il_db
        )
    if key == FILTER_SHARP80:
        return FilterProfile(
            FAMILY_SUPERGAUSSIAN, params.flattop_bw, params.order_sharp, params.filter_il_db
        )
    if key == FILTER_FLAT:
        return FilterProfile(FAMILY_FLAT, insertion_loss_db=params.filter_il_db)
    if key.startswith("file:"):
        return load_filter_profile(key[5:], params.filter_il_db)
    raise ValueError(f"unknown filter {key!r}")


def _seeds(seed_set: int, tx_index: int) -> TxSeeds:
    return TxSeeds(*[(seed_set, tx_index, stream) for stream in range(8)])


def _laser_seed(seed_set: int, tx_index: int):
    return (seed_set, tx_index, 6)


def ds_tx_config(params: SimParams, architecture: str) -> TxConfig:
    if architecture == ARCH_ONE_LASER:
        return TxConfig(
            symbol_rate=params.symbol_rate,
            rolloff=params.rolloff,
            mode=MODE_SSB,
            f_if=-params.f_if,
            analog_bw_3db=params.tx_bw_ssb,
            modulator_output_dbm=params.mod_out_ssb_dbm,
            booster_nf_db=params.booster_nf_db,
            launch_dbm=params.launch_dbm,
            sim_sps=params.sim_sps,
        )
    return TxConfig(
        symbol_rate=params.symbol_rate,
        rolloff=params.rolloff,
        mode=MODE_BASEBAND,
        analog_bw_3db=params.tx_bw_baseband,
        modulator_output_dbm=params.mod_out_baseband_dbm,
        booster_nf_db=params.booster_nf_db,
        launch_dbm=params.launch_dbm,
        sim_sps=params.sim_sps,
    )


def us_tx_config(params: SimParams, architecture: str) -> TxConfig:
    """Config of the co-located upstream transmitter (the circulator leak source)."""
    cfg = ds_tx_config(params, architecture)
    if architecture == ARCH_ONE_LASER:
        return replace(cfg, f_if=+params.f_if)
    return cfg


def rx_config(params: SimParams, architecture: str, scenario: Scenario | None = None) -> RxConfig:
    plan = scenario.plan if scenario else build_plan(architecture, 0.0, params)
    seed_set = scenario.seed_set if scenario else 0
    if architecture == ARCH_ONE_LASER:
        bw = params.rx_bw_ssb
        lo_seed = _laser_seed(seed_set, TX_UPSTREAM)  # shared ONU laser
    else:
        bw = params.rx_bw_baseband
        lo_seed = (seed_set, _LO_STREAM, 6)
    lo = LaserSpec(params.laser_power_dbm, params.linewidth_hz, plan.lo_offset, lo_seed)
    return RxConfig(
        lo=lo,
        analog_bw_3db=bw,
        adc_bits=params.adc_bits,
        adc_sps=params.adc_sps,
        agc_clip_factor=params.agc_clip_factor,
        noise_seed=(seed_set, _RXNOISE_STREAM, 0),
    )


def dsp_config(
    scenario: Scenario, include_fiber: bool = True, overrides: dict | None = None
) -> DspConfig:
    params = scenario.params
    plan = scenario.plan
    beta2 = beta3 = 0.0
    if include_fiber:
        for spec in (params.trunk_fiber(), params.pon_fiber()):
            b2, b3 = beta2_beta3(spec, params.lambda_n)
            beta2 += b2 * spec.length_km * 1e3
            beta3 += b3 * spec.length_km * 1e3
    cfg = DspConfig(
        symbol_rate=params.symbol_rate,
        adc_sps=params.adc_sps,
        rolloff=params.rolloff,
        f_if=plan.ds_if,
        beta2_total=beta2,
        beta3_total=beta3,
        freq_offset=plan.lo_offset,
        eq_taps=params.eq_taps,
        eq_train_symbols=params.preamble_len,
        cpr_window=params.cpr_window,
        min_counted_bits=params.min_counted_bits,
    )
    if overrides:
        cfg = replace(cfg, **overrides)
    return cfg


def _ds_laser(params: SimParams, plan: FrequencyPlan, seed_set: int, tx_index: int) -> LaserSpec:
    return LaserSpec(
        params.laser_power_dbm,
        params.linewidth_hz,
        plan.ds_laser_offset,
        _laser_seed(seed_set, tx_index),
    )


def _transmit_channel(scenario: Scenario, tx_index: int) -> tuple[SampledField, FrameSymbols]:
    params = scenario.params
    plan = scenario.plan
    cfg = ds_tx_config(params, scenario.architecture)
    laser = _ds_laser(params, plan, scenario.seed_set, tx_index)
    return transmit(cfg, params.layout(), _seeds(scenario.seed_set, tx_index), laser, params.lambda_n)


def _transmit_leak(scenario: Scenario) -> SampledField:
    params = scenario.params
    plan = scenario.plan
    cfg = us_tx_config(params, scenario.architecture)
    laser = LaserSpec(
        params.laser_power_dbm,
        params.linewidth_hz,
        plan.us_laser_offset,
        _laser_seed(scenario.seed_set, TX_UPSTREAM),
    )
    launched, _ = transmit(
        cfg, params.layout(), _seeds(scenario.seed_set, TX_UPSTREAM), laser, params.lambda_n
    )
    return launched


def _coupler(scenario: Scenario) -> CouplerSpec:
    params = scenario.params
    if scenario.leak_enabled:
        return CouplerSpec("circulator", params.coupler_il_db, params.isolation_db)
    return CouplerSpec("diplexer", params.coupler_il_db)


def _plant_output(scenario: Scenario) -> tuple[SampledField, FrameSymbols]:
    """Tx through MUX, trunk fiber, DEMUX; output before the ODN attenuation."""
    params = scenario.params
    profile = filter_profile(scenario.filter_key, params)
    center, refs = _transmit_channel(scenario, TX_CENTER)
    if params.neighbors_enabled:
        lo_ch, _ = _transmit_channel(scenario, TX_NEIGH_LO)
        hi_ch, _ = _transmit_channel(scenario, TX_NEIGH_HI)
        lo_ch = frequency_shift(lo_ch, -params.grid_hz, check_aliasing=False)
        hi_ch = frequency_shift(hi_ch, +params.grid_hz, check_aliasing=False)
        agg = wdm_assemble(center, (lo_ch, hi_ch), params.grid_hz, profile)
        del center, lo_ch, hi_ch
    else:
        agg = apply_transfer(center, filter_transfer(profile))
    agg = ssmf_propagate(agg, params.trunk_fiber(), params.lambda_n)
    agg = apply_transfer(agg, filter_transfer(profile))  # DEMUX port of the test channel
    return agg, refs


def run_once(scenario: Scenario, voa_db: float, calibration: NoiseCalibration) -> DspResult:
    """One downstream run at a fixed ODN attenuation (straight-line chain)."""
    params = scenario.params
    rx = rx_config(params, scenario.architecture, scenario).with_noise(calibration.noise_psd)
    demux_out, refs = _plant_output(scenario)
    x = voa(demux_out, voa_db)
    x = ssmf_propagate(x, params.pon_fiber(), params.lambda_n)
    leak = _transmit_leak(scenario) if scenario.leak_enabled else None
    x = couple(x, leak, _coupler(scenario))
    x = coherent_mix(x, rx.lo)
    x = rx_analog(x, rx.analog_bw_3db)
    x = agc_adc(x, rx, params.symbol_rate)
    return dsp_receive(x, dsp_config(scenario), refs)


@dataclass(frozen=True)
class PreparedPoint:
    """ADC-rate components of one scenario, linear in the VOA gain.

    The receiver input is ``g * sig + leak + noise`` with ``g`` the VOA
    amplitude gain; AGC, quantization, and DSP are applied per evaluation.
    """

    sig_x: np.ndarray
    sig_y: np.ndarray
    leak_x: np.ndarray | None
    leak_y: np.ndarray | None
    noise_x: np.ndarray
    noise_y: np.ndarray
    adc_rate: float
    rx: RxConfig
    dsp: DspConfig
    refs: FrameSymbols


def _rx_noise_component(rx: RxConfig, params: SimParams, noise_psd: float) -> SampledField:
    """ADC-input electrical noise, white over the ADC band."""
    n_adc = params.n_symbols * rx.adc_sps
    adc_rate = rx.adc_sps * params.symbol_rate
    nx, ny = make_rx_noise(n_adc, adc_rate, noise_psd, rx.noise_seed)
    return SampledField(nx, ny, adc_rate, 0.0)


def _mix_filter_sample(
    field: SampledField, rx: RxConfig, params: SimParams, lo_wave: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Fused LO mixing, analog response, and ADC sampling (one FFT per pol)."""
    n = field.n_samples
    m = params.n_symbols * rx.adc_sps
    f = np.fft.fftfreq(n, d=1.0 / field.sample_rate)
    h = gaussian_lowpass(f, rx.analog_bw_3db)
    out = []
    for e in (field.ex, field.ey):
        spec = np.fft.fft(kernels.mix_conj(e, lo_wave)) * h
        out.append(np.fft.ifft(truncate_spectrum(spec, m)))
    return out[0], out[1]


def prepare_point(
    scenario: Scenario, calibration: NoiseCalibration, dsp_overrides: dict | None = None
) -> PreparedPoint:
    """Precompute the VOA-independent components of one scenario.

    The plant (MUX ports, trunk dispersion/loss, DEMUX, coupler loss, PON
    fiber) is one combined spectral transfer per channel, applied on a
    single FFT round trip; the result is identical to the staged
    composition in :func:`run_once` up to floating-point reordering.
    """
    params = scenario.params
    rx = rx_config(params, scenario.architecture, scenario).with_noise(calibration.noise_psd)
    profile = filter_profile(scenario.filter_key, params)
    n = params.n_samples
    f = np.fft.fftfreq(n, d=1.0 / params.sim_rate)

    through_gain = 10.0 ** (-_coupler(scenario).insertion_loss_db / 20.0)
    h_common = (
        fiber_transfer(params.trunk_fiber(), params.lambda_n)(f)
        * filter_transfer(profile)(f)
        * fiber_transfer(params.pon_fiber(), params.lambda_n)(f)
        * through_gain
    )

    slots = [(TX_CENTER, 0.0)]
    if params.neighbors_enabled:
        slots += [(TX_NEIGH_LO, -params.grid_hz), (TX_NEIGH_HI, +params.grid_hz)]
    acc_x = np.zeros(n, dtype=np.complex128)
    acc_y = np.zeros(n, dtype=np.complex128)
    refs = None
    for tx_index, slot in slots:
        launch, frame = _transmit_channel(scenario, tx_index)
        if tx_index == TX_CENTER:
            refs = frame
        bins = round(slot * n / params.sim_rate)
        h_ch = filter_transfer(profile.recenter(slot))(f) * h_common
        # integer-bin slot shift is an exact circular roll of the spectrum
        acc_x += np.roll(np.fft.fft(launch.ex), bins) * h_ch
        acc_y += np.roll(np.fft.fft(launch.ey), bins) * h_ch
        del launch
    plant_out = SampledField(np.fft.ifft(acc_x), np.fft.ifft(acc_y), params.sim_rate)
    del acc_x, acc_y

    lo_wave = laser_field(rx.lo, n, params.sim_rate).ex
    lo_wave = lo_wave / np.abs(lo_wave)
    sig_x, sig_y = _mix_filter_sample(plant_out, rx, params, lo_wave)
    del plant_out

    leak_x = leak_y = None
    if scenario.leak_enabled:
        leak = _transmit_leak(scenario)
        iso = 10.0 ** (-params.isolation_db / 20.0)
        leak = leak.with_samples(leak.ex * iso, leak.ey * iso)
        leak_x, leak_y = _mix_filter_sample(leak, rx, params, lo_wave)
        del leak

    noise = _rx_noise_component(rx, params, calibration.noise_psd)
    return PreparedPoint(
        sig_x=sig_x,
        sig_y=sig_y,
        leak_x=leak_x,
        leak_y=leak_y,
        noise_x=noise.ex,
        noise_y=noise.ey,
        adc_rate=params.symbol_rate * rx.adc_sps,
        rx=rx,
        dsp=dsp_config(scenario, overrides=dsp_overrides),
        refs=refs,
    )


def ber_at(prep: PreparedPoint, voa_db: float) -> DspResult:
    """Evaluate the prepared scenario at one ODN attenuation."""
    g = 10.0 ** (-voa_db / 20.0)
    ex = g * prep.sig_x + prep.noise_x
    ey = g * prep.sig_y + prep.noise_y
    if prep.leak_x is not None:
        ex = ex + prep.leak_x
        ey = ey + prep.leak_y
    field = SampledField(ex, ey, prep.adc_rate)
    return dsp_receive(agc_quantize(field, prep.rx), prep.dsp, prep.refs)


class ThresholdNotBracketed(RuntimeError):
    def __init__(self, ber_lo: float, ber_hi: float, bracket: tuple[float, float]):
        super().__init__(
            f"2% threshold not bracketed on VOA [{bracket[0]}, {bracket[1]}] dB: "
            f"BER {ber_lo:.5f} .. {ber_hi:.5f}"
        )
        self.ber_lo = ber_lo
        self.ber_hi = ber_hi


@dataclass(frozen=True)
class BudgetResult:
    budget_db: float
    voa_db: float
    ber: float
    iterations: int


def find_budget(
    scenario: Scenario,
    calibration: NoiseCalibration,
    prep: PreparedPoint | None = None,
    dsp_overrides: dict | None = None,
) -> BudgetResult:
    """Bisect the VOA attenuation to the 2% BER threshold.

    Returns the attenuation plus the fixed reference-path losses, so the
    unimpaired reference lands at the 38 dB overall budget.  BER is
    monotone non-decreasing in attenuation (verified property), which makes
    the bisection valid.
    """
    params = scenario.params
    if prep is None:
        prep = prepare_point(scenario, calibration, dsp_overrides)
    target = params.target_ber
    lo, hi = params.voa_lo_db, params.voa_hi_db
    ber_lo = ber_at(prep, lo).ber
    ber_hi = ber_at(prep, hi).ber
    iters = 2
    # heavily impaired scenarios (narrow filter, large detuning) can push the
    # threshold below the nominal bracket; extend downward before giving up
    while ber_lo > target and lo > 5.0:
        lo = max(5.0, lo - 5.0)
        ber_lo = ber_at(prep, lo).ber
        iters += 1
    if not (ber_lo <= target <= ber_hi):
        raise ThresholdNotBracketed(ber_lo, ber_hi, (lo, hi))
    ber_mid = ber_hi
    while hi - lo > params.budget_tol_db:
        mid = 0.5 * (lo + hi)
        ber_mid = ber_at(prep, mid).ber
        iters += 1
        if ber_mid > target:
            hi = mid
        else:
            lo = mid
    voa_star = 0.5 * (lo + hi)
    return BudgetResult(
        budget_db=voa_star + params.fixed_path_loss_db(),
        voa_db=voa_star,
        ber=ber_mid,
        iterations=iters,
    )


@dataclass(frozen=True)
class PenaltyPoint:
    f_acc: float
    budget_db: float
    penalty_db: float
    ber_residual: float


@dataclass(frozen=True)
class PenaltyCurve:
    architecture: str
    filter_key: str
    seed_set: int
    reference_budget_db: float
    points: tuple[PenaltyPoint, ...]


def reference_scenario(architecture: str, seed_set: int, params: SimParams) -> Scenario:
    """Flat 3.5 dB filtering, leak disabled, perfect laser accuracy."""
    return build_scenario(architecture, FILTER_FLAT, 0.0, seed_set, params, leak=False)


_reference_cache: dict = {}


def reference_budget(
    architecture: str,
    seed_set: int,
    params: SimParams,
    calibration: NoiseCalibration,
    dsp_overrides: dict | None = None,
) -> BudgetResult:
    """Budget of the unimpaired chain; cached per configuration."""
    key = (architecture, seed_set, params, tuple(sorted((dsp_overrides or {}).items())))
    if key not in _reference_cache:
        sc = reference_scenario(architecture, seed_set, params)
        _reference_cache[key] = find_budget(sc, calibration, dsp_overrides=dsp_overrides)
    return _reference_cache[key]


def penalty_sweep(
    architecture: str,
    filter_key: str,
    f_acc_grid: list[float],
    seed_set: int,
    params: SimParams,
    calibration: NoiseCalibration,
    reference: BudgetResult | None = None,
    dsp_overrides: dict | None = None,
) -> PenaltyCurve:
    """Penalty versus laser frequency accuracy for one (architecture, filter)."""
    if list(f_acc_grid) != sorted(f_acc_grid):
        raise ValueError("f_acc grid must be sorted ascending")
    if reference is None:
        reference = reference_budget(architecture, seed_set, params, calibration, dsp_overrides)
    points = []
    for f_acc in f_acc_grid:
        sc = build_scenario(architecture, filter_key, f_acc, seed_set, params)
        res = find_budget(sc, calibration, dsp_overrides=dsp_overrides)
        points.append(
            PenaltyPoint(
                f_acc=f_acc,
                budget_db=res.budget_db,
                penalty_db=reference.budget_db - res.budget_db,
                ber_residual=res.ber,
            )
        )
    return PenaltyCurve(architecture, filter_key, seed_set, reference.budget_db, tuple(points))


# --- calibration -----------------------------------------------------------


def calibration_key(architecture: str, seed_set: int, params: SimParams) -> str:
    """Hash of everything the back-to-back sensitivity depends on."""
    tx = ds_tx_config(params, architecture)
    rx = rx_config(params, architecture)
    blob = repr((tx, rx.analog_bw_3db, rx.adc_bits, rx.adc_sps, rx.agc_clip_factor,
                 params.n_symbols, params.preamble_len, params.pilot_period,
                 params.eq_taps, params.cpr_window, params.linewidth_hz,
                 params.sensitivity_dbm, params.target_ber, seed_set))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def back_to_back_ber_fn(
    architecture: str, seed_set: int, params: SimParams
) -> Callable[[float], float]:
    """BER of the filterless, leak-free chain at the sensitivity power vs noise PSD.

    Precomputes the signal and a unit-PSD noise component once; each call
    scales the noise and reruns AGC/ADC and the DSP, which keeps the
    calibration bisection fast and exactly reproducible.
    """
    sc = build_scenario(architecture, FILTER_FLAT, 0.0, seed_set, params, leak=False)
    rx = rx_config(params, architecture, sc)
    launched, refs = _transmit_channel(sc, TX_CENTER)
    at_rx = set_power(launched, params.sensitivity_dbm)
    lo_wave = laser_field(rx.lo, at_rx.n_samples, params.sim_rate).ex
    lo_wave = lo_wave / np.abs(lo_wave)
    sig_x, sig_y = _mix_filter_sample(at_rx, rx, params, lo_wave)
    sig = SampledField(sig_x, sig_y, params.symbol_rate * rx.adc_sps)
    unit_noise = _rx_noise_component(rx, params, 1.0)
    dsp_cfg = dsp_config(sc, include_fiber=False)

    def ber_at_psd(noise_psd: float) -> float:
        s = np.sqrt(noise_psd)
        field = SampledField(
            sig.ex + s * unit_noise.ex, sig.ey + s * unit_noise.ey, sig.sample_rate
        )
        return dsp_receive(agc_quantize(field, rx), dsp_cfg, refs).ber

    return ber_at_psd


def ideal_qpsk_psd(params: SimParams) -> float:
    """Per-quadrature noise PSD at which ideal QPSK theory hits the target BER.

    Inverts BER = Q(sqrt(Es/N0)) at the sensitivity power; used to seed the
    calibration bracket (the implemented receiver always needs less noise).
    """
    from math import erfc, sqrt

    def qfunc_inv(p: float) -> float:
        lo, hi = 0.0, 10.0
        for _ in range(80):
            mid = 0.5 * (lo + hi)
            if 0.5 * erfc(mid / sqrt(2.0)) > p:
                lo = mid
            else:
                hi = mid
        return 0.5 * (lo + hi)

    es_n0 = qfunc_inv(params.target_ber) ** 2
    p_pol = 10.0 ** (params.sensitivity_dbm / 10.0) * 1e-3 / 2.0
    n0 = p_pol / (es_n0 * params.symbol_rate)  # complex PSD per polarization
    return n0 / 2.0  # per quadrature


def calibrate(
    architecture: str,
    seed_set: int,
    params: SimParams,
    cache_path=None,
) -> NoiseCalibration:
    """Anchor the receiver noise to -38 dBm @ 2% BER for this architecture."""
    key = calibration_key(architecture, seed_set, params)
    if cache_path:
        cached = load_calibration(cache_path, key)
        if cached is not None:
            return cached
    ber_fn = back_to_back_ber_fn(architecture, seed_set, params)
    psd0 = ideal_qpsk_psd(params)
    cal = calibrate_noise(
        ber_fn,
        psd0 / 8.0,
        psd0 * 4.0,
        sensitivity_dbm=params.sensitivity_dbm,
        target_ber=params.target_ber,
        ber_tol=params.ber_tol,
    )
    if cache_path:
        save_calibration(cache_path, key, cal)
    return cal
