"""Passive optical plant: MUX/DEMUX filters, fiber, couplers, VOA.

Everything between the Tx booster and the receiver input.  All devices are
linear; filters are zero-phase (no measured phase data exists for the
deployed units, documented modeling assumption), fiber is a dispersive
all-pass with optional attenuation.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .constants import LIGHTSPEED
from .field import SampledField, SpectralTransfer, apply_transfer, superpose

FAMILY_GAUSSIAN = "gaussian"
FAMILY_SUPERGAUSSIAN = "supergaussian"
FAMILY_FLAT = "flat"
FAMILY_TABULATED = "tabulated"

LAMBDA_REF = 1550e-9  # reference wavelength for the dispersion coefficient


PHASE_ZERO = "zero"
PHASE_MINIMUM = "minimum"


@dataclass(frozen=True)
class FilterProfile:
    """Parametric MUX/DEMUX port response.

    ``|H(f)|^2 = 10^(-IL/10) * exp(-ln2 * (2*(f-center)/bw_3db)^(2*order))``
    for the (super-)Gaussian families; order 1 is plain Gaussian.  ``flat``
    is a frequency-independent insertion loss (reference scenarios), and
    ``tabulated`` interpolates a measured two-column profile.

    Non-flat profiles carry the minimum-phase response implied by their
    magnitude (Hilbert transform of the log-magnitude): passive filters are
    close to minimum phase, and the resulting band-edge group delay is what
    makes sharp-skirted ports expensive for signals riding their edges.
    ``phase="zero"`` restores a phase-free response.
    """

    family: str = FAMILY_GAUSSIAN
    bw_3db: float = 60e9
    order: float = 1.0
    insertion_loss_db: float = 3.5
    center: float = 0.0
    phase: str = PHASE_MINIMUM
    table_f: np.ndarray | None = None
    table_mag_db: np.ndarray | None = None

    def __post_init__(self):
        if self.family not in (
            FAMILY_GAUSSIAN,
            FAMILY_SUPERGAUSSIAN,
            FAMILY_FLAT,
            FAMILY_TABULATED,
        ):
            raise ValueError(f"unknown filter family {self.family!r}")
        if self.phase not in (PHASE_ZERO, PHASE_MINIMUM):
            raise ValueError(f"unknown phase mode {self.phase!r}")
        if self.family == FAMILY_TABULATED and self.table_f is None:
            raise ValueError("tabulated profile needs table data")

    def recenter(self, center: float) -> "FilterProfile":
        return replace(self, center=center)


# minimum-phase table settings: grid wide enough for any queried offset,
# stopband floored so the cepstrum stays well conditioned
_MP_POINTS = 1 << 16
_MP_SPAN = 1.2e12
_MP_FLOOR_DB = -50.0


def _magnitude_fn(profile: FilterProfile):
    peak = 10.0 ** (-profile.insertion_loss_db / 20.0)
    if profile.family == FAMILY_TABULATED:
        tf, tm = profile.table_f, profile.table_mag_db

        def mag(f):
            mag_db = np.interp(f, tf, tm, left=tm[0], right=tm[-1])
            return 10.0 ** (mag_db / 20.0)

        return mag
    half_ln2 = 0.5 * np.log(2.0)
    two_n = 2.0 * profile.order

    def mag(f):
        u = np.abs(2.0 * f / profile.bw_3db)
        return peak * np.exp(-half_ln2 * u**two_n)

    return mag


def _minimum_phase_table(mag) -> tuple[np.ndarray, np.ndarray]:
    """Complex min-phase response on a dense grid via the cepstral method."""
    f = np.fft.fftfreq(_MP_POINTS, d=1.0 / _MP_SPAN)
    a = np.maximum(mag(f), 10.0 ** (_MP_FLOOR_DB / 20.0))
    cep = np.fft.ifft(np.log(a))
    fold = np.zeros(_MP_POINTS)
    fold[0] = 1.0
    fold[_MP_POINTS // 2] = 1.0
    fold[1 : _MP_POINTS // 2] = 2.0
    h = np.exp(np.fft.fft(cep * fold))
    order = np.argsort(f)
    return f[order], h[order]


def filter_transfer(profile: FilterProfile) -> SpectralTransfer:
    """Complex transfer function of one filter port (frequency from center)."""
    peak = 10.0 ** (-profile.insertion_loss_db / 20.0)
    if profile.family == FAMILY_FLAT:
        return SpectralTransfer(lambda f: np.full_like(f, peak, dtype=np.complex128))

    mag = _magnitude_fn(profile)
    center = profile.center
    if profile.phase == PHASE_ZERO:
        return SpectralTransfer(lambda f: mag(f - center).astype(np.complex128))

    grid_f, grid_h = _minimum_phase_table(mag)

    def eval_minphase(f):
        fr = f - center
        re = np.interp(fr, grid_f, grid_h.real)
        im = np.interp(fr, grid_f, grid_h.imag)
        h = re + 1j * im
        # the table carries the exact magnitude; renormalize interp error
        m = np.abs(h)
        good = m > 0
        h[good] *= mag(fr[good]) / m[good]
        return h

    return SpectralTransfer(eval_minphase)


def load_filter_profile(path, insertion_loss_db: float = 3.5) -> FilterProfile:
    """Load a measured profile from two-column text (offset_GHz, magnitude_dB).

    The magnitude column is renormalized so the peak sits at the stated
    insertion loss; linear interpolation between points, clamped outside.
    """
    data = np.loadtxt(path)
    if data.ndim != 2 or data.shape[1] != 2:
        raise ValueError("expected two columns: frequency_offset_ghz, magnitude_db")
    order = np.argsort(data[:, 0])
    f = data[order, 0] * 1e9
    mag = data[order, 1] - data[:, 1].max() - insertion_loss_db
    return FilterProfile(
        family=FAMILY_TABULATED,
        insertion_loss_db=insertion_loss_db,
        table_f=f,
        table_mag_db=mag,
    )


@dataclass(frozen=True)
class FiberSpec:
    """SSMF section: attenuation, dispersion + slope referred to 1550 nm."""

    length_km: float
    alpha_db_km: float = 0.2
    d_ps_nm_km: float = 16.3
    slope_ps_nm2_km: float = 0.056
    lossless: bool = False

    def __post_init__(self):
        if self.length_km < 0:
            raise ValueError("length must be non-negative")

    def dispersion_at(self, wavelength: float) -> float:
        """D(lambda) in ps/nm/km via the linear slope model."""
        return self.d_ps_nm_km + self.slope_ps_nm2_km * (wavelength - LAMBDA_REF) * 1e9


def beta2_beta3(spec: FiberSpec, wavelength: float) -> tuple[float, float]:
    """Taylor dispersion coefficients (s^2/m, s^3/m) at ``wavelength``."""
    d = spec.dispersion_at(wavelength) * 1e-6  # s/m^2
    s = spec.slope_ps_nm2_km * 1e3  # s/m^3
    beta2 = -d * wavelength**2 / (2.0 * np.pi * LIGHTSPEED)
    beta3 = (wavelength**2 / (2.0 * np.pi * LIGHTSPEED)) ** 2 * (s + 2.0 * d / wavelength)
    return beta2, beta3


def fiber_transfer(spec: FiberSpec, wavelength: float, sign: float = -1.0) -> SpectralTransfer:
    """All-pass dispersion response (plus attenuation unless lossless).

    ``sign=-1`` is propagation; ``sign=+1`` is the ideal inverse used by
    the DSP's dispersion compensation.
    """
    beta2, beta3 = beta2_beta3(spec, wavelength)
    length_m = spec.length_km * 1e3
    loss = 1.0 if spec.lossless else 10.0 ** (-spec.alpha_db_km * spec.length_km / 20.0)
    amp = loss if sign < 0 else 1.0

    def evaluate(f):
        w = 2.0 * np.pi * f
        phase = (beta2 / 2.0) * w**2 * length_m + (beta3 / 6.0) * w**3 * length_m
        return amp * np.exp(1j * sign * phase)

    return SpectralTransfer(evaluate)


def ssmf_propagate(field: SampledField, spec: FiberSpec, wavelength: float) -> SampledField:
    """Linear fiber propagation: chromatic dispersion and attenuation."""
    return apply_transfer(field, fiber_transfer(spec, wavelength))


@dataclass(frozen=True)
class CouplerSpec:
    """Direction-separating device at the transceiver: diplexer or circulator."""

    kind: str = "diplexer"  # or "circulator"
    insertion_loss_db: float = 1.0
    isolation_db: float = 30.0

    def __post_init__(self):
        if self.kind not in ("diplexer", "circulator"):
            raise ValueError(f"unknown coupler kind {self.kind!r}")
        if self.insertion_loss_db < 0:
            raise ValueError("insertion loss must be non-negative")
        if self.kind == "circulator" and self.isolation_db <= 0:
            raise ValueError("circulator isolation must be positive")


def couple(
    through: SampledField, leak: SampledField | None, spec: CouplerSpec
) -> SampledField:
    """Pass the through-path signal, adding the co-located Tx leak for circulators.

    The leak is the local transmitter's full launch waveform attenuated by
    the port isolation; it reaches the receiver without touching the ODN.
    """
    il = 10.0 ** (-spec.insertion_loss_db / 20.0)
    ex = through.ex * il
    ey = through.ey * il
    if spec.kind == "circulator":
        if leak is None:
            raise ValueError("circulator coupling requires the co-located Tx leak field")
        if leak.n_samples != through.n_samples or leak.sample_rate != through.sample_rate:
            raise ValueError("leak grid must match the through path")
        iso = 10.0 ** (-spec.isolation_db / 20.0)
        ex = ex + leak.ex * iso
        ey = ey + leak.ey * iso
    return SampledField(ex, ey, through.sample_rate, through.center_offset)


def voa(field: SampledField, attenuation_db: float) -> SampledField:
    """Variable optical attenuator: uniform amplitude scaling."""
    if attenuation_db < 0:
        raise ValueError("attenuation must be non-negative")
    g = 10.0 ** (-attenuation_db / 20.0)
    return field.with_samples(field.ex * g, field.ey * g)


def wdm_assemble(
    center_ch: SampledField,
    neighbors: tuple[SampledField, SampledField] | list[SampledField],
    grid_hz: float,
    profile: FilterProfile,
) -> SampledField:
    """MUX: filter each channel by its own port and superpose.

    Channel fields must already sit at their slot offsets (center at 0,
    neighbors at -grid and +grid).  The port profile is recentered per slot,
    so adjacent-channel crosstalk enters through the filter skirts.
    """
    if len(neighbors) != 2:
        raise ValueError("expected exactly two adjacent channels")
    slots = (-grid_hz, 0.0, grid_hz)
    fields = (neighbors[0], center_ch, neighbors[1])
    filtered = [
        apply_transfer(f, filter_transfer(profile.recenter(slot)))
        for f, slot in zip(fields, slots)
    ]
    return superpose(filtered)
