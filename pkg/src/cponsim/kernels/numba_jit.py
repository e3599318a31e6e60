"""Numba-accelerated implementations of the hot waveform kernels.

Each function mirrors its twin in :mod:`cponsim.kernels.numpy_ref`; the JIT
versions fuse the elementwise passes to avoid large complex temporaries,
which matters on the multi-megasample arrays the simulator pushes around.
"""

import math

import numpy as np
from numba import njit


@njit(cache=True)
def phase_ramp_mul(x, phase_per_sample, phase0=0.0):
    out = np.empty_like(x)
    for n in range(x.size):
        p = phase0 + phase_per_sample * n
        out[n] = x[n] * complex(math.cos(p), math.sin(p))
    return out


@njit(cache=True)
def laser_wave(increments, phase_per_sample, amplitude):
    out = np.empty(increments.size, dtype=np.complex128)
    acc = 0.0
    for n in range(increments.size):
        acc += increments[n]
        p = phase_per_sample * n + acc
        out[n] = amplitude * complex(math.cos(p), math.sin(p))
    return out


@njit(cache=True)
def mix_conj(sig, lo):
    out = np.empty_like(sig)
    for n in range(sig.size):
        out[n] = sig[n] * np.conj(lo[n])
    return out


@njit(cache=True)
def butterfly_fir(ex, ey, wxx, wxy, wyx, wyy):
    n = ex.size
    taps = wxx.size
    c = (taps - 1) // 2
    ox = np.empty(n, dtype=np.complex128)
    oy = np.empty(n, dtype=np.complex128)
    for i in range(n):
        ax = 0.0 + 0.0j
        ay = 0.0 + 0.0j
        base = i - c
        if base >= 0 and base + taps <= n:
            for k in range(taps):
                sx = ex[base + k]
                sy = ey[base + k]
                ax += wxx[k] * sx + wxy[k] * sy
                ay += wyx[k] * sx + wyy[k] * sy
        else:
            for k in range(taps):
                j = (base + k) % n
                sx = ex[j]
                sy = ey[j]
                ax += wxx[k] * sx + wxy[k] * sy
                ay += wyx[k] * sx + wyy[k] * sy
        ox[i] = ax
        oy[i] = ay
    return ox, oy


@njit(cache=True)
def quantize_midrise(x, step, half_levels):
    out = np.empty_like(x)
    lo = float(-half_levels)
    hi = float(half_levels - 1)
    for n in range(x.size):
        code = math.floor(x[n] / step)
        if code < lo:
            code = lo
        elif code > hi:
            code = hi
        out[n] = (code + 0.5) * step
    return out


@njit(cache=True)
def pilot_phase_correct(symbols, pilot_pos, pilot_phase):
    out = np.empty_like(symbols)
    npil = pilot_pos.size
    seg = 0
    for n in range(symbols.size):
        if n <= pilot_pos[0]:
            p = pilot_phase[0]
        elif n >= pilot_pos[npil - 1]:
            p = pilot_phase[npil - 1]
        else:
            while pilot_pos[seg + 1] < n:
                seg += 1
            x0 = pilot_pos[seg]
            x1 = pilot_pos[seg + 1]
            t = (n - x0) / (x1 - x0)
            p = pilot_phase[seg] + t * (pilot_phase[seg + 1] - pilot_phase[seg])
        out[n] = symbols[n] * complex(math.cos(-p), math.sin(-p))
    return out
