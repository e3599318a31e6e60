"""Coherent-PON over brownfield DWDM physical-layer simulator.

Simulates 100 Gbit/s dual-polarization QPSK downstream transmission through
deployed MUX/DEMUX filter cascades for three coexistence architectures, and
measures the PON loss-budget penalty versus laser frequency accuracy.
"""

from .field import (
    SampledField,
    SpectralTransfer,
    apply_transfer,
    frequency_shift,
    power_dbm,
    resample,
    set_power,
    superpose,
    total_power,
)
from .harness import (
    ARCH_DUAL,
    ARCH_ONE_LASER,
    ARCH_TWO_LASER,
    ARCHITECTURES,
    FILTER_FLAT,
    FILTER_GAUSS60,
    FILTER_SHARP80,
    FILTER_SMOOTH80,
    FILTERS,
    DEFAULT_PARAMS,
    BudgetResult,
    PenaltyCurve,
    PenaltyPoint,
    Scenario,
    SimParams,
    build_scenario,
    calibrate,
    find_budget,
    penalty_sweep,
    reference_budget,
    run_once,
)
from .plant import CouplerSpec, FiberSpec, FilterProfile, couple, filter_transfer, ssmf_propagate, voa
from .receiver import NoiseCalibration, RxConfig, agc_adc, coherent_mix
from .transmitter import FrameLayout, LaserSpec, TxConfig, gen_bits, qpsk_map

__version__ = "0.1.0"
