"""Pure-numpy reference implementations of the hot waveform kernels.

These are the fallback path used when numba is unavailable or disabled via
``CPONSIM_NUMBA=0``.  The numba twins in :mod:`cponsim.kernels.numba_jit`
must produce numerically identical results (verified in tests).
"""

import numpy as np


def phase_ramp_mul(x: np.ndarray, phase_per_sample: float, phase0: float = 0.0) -> np.ndarray:
    """Multiply ``x`` by ``exp(j*(phase0 + n*phase_per_sample))``."""
    n = np.arange(x.size)
    return x * np.exp(1j * (phase0 + phase_per_sample * n))


def laser_wave(increments: np.ndarray, phase_per_sample: float, amplitude: float) -> np.ndarray:
    """Complex CW wave: deterministic ramp plus a Wiener phase walk.

    ``increments`` are the per-sample phase-noise steps; the walk starts at 0.
    """
    phase = np.cumsum(increments)
    n = np.arange(increments.size)
    return amplitude * np.exp(1j * (phase_per_sample * n + phase))


def mix_conj(sig: np.ndarray, lo: np.ndarray) -> np.ndarray:
    """Downconvert: ``sig * conj(lo)`` with unit-amplitude ``lo``."""
    return sig * np.conj(lo)


def butterfly_fir(
    ex: np.ndarray,
    ey: np.ndarray,
    wxx: np.ndarray,
    wxy: np.ndarray,
    wyx: np.ndarray,
    wyy: np.ndarray,
) -> tuple[np.ndarray, np.ndarray]:
    """2x2 FIR bank with circular boundary, tap k weighting ``x[n + k - c]``.

    Output sample n is aligned with input sample n for odd tap counts
    (c = (taps-1)//2).
    """
    taps = wxx.size
    c = (taps - 1) // 2
    exp_x = np.concatenate((ex[-c:], ex, ex[: taps - 1 - c]))
    exp_y = np.concatenate((ey[-c:], ey, ey[: taps - 1 - c]))
    # np.convolve flips the kernel; pre-flip so tap k hits x[n + k - c].
    ox = np.convolve(exp_x, wxx[::-1], mode="valid") + np.convolve(exp_y, wxy[::-1], mode="valid")
    oy = np.convolve(exp_x, wyx[::-1], mode="valid") + np.convolve(exp_y, wyy[::-1], mode="valid")
    return ox, oy


def quantize_midrise(x: np.ndarray, step: float, half_levels: int) -> np.ndarray:
    """Uniform mid-rise quantizer with clipping.

    Codes span [-half_levels, half_levels-1]; reconstruction is
    ``(code + 0.5) * step``.  Full scale is ``half_levels * step``.
    """
    code = np.floor(x / step)
    np.clip(code, -half_levels, half_levels - 1, out=code)
    return (code + 0.5) * step


def pilot_phase_correct(
    symbols: np.ndarray, pilot_pos: np.ndarray, pilot_phase: np.ndarray
) -> np.ndarray:
    """Remove a phase trajectory interpolated linearly between pilot estimates.

    Positions outside the pilot span are corrected with the edge estimate.
    """
    n = np.arange(symbols.size)
    phase = np.interp(n, pilot_pos.astype(np.float64), pilot_phase)
    return symbols * np.exp(-1j * phase)
