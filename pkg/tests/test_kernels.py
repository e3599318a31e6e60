"""Numba kernels must match the pure-numpy reference path."""

import os
import subprocess
import sys

import numpy as np
import pytest

from cponsim.kernels import numpy_ref

try:
    from cponsim.kernels import numba_jit

    HAVE_NUMBA = True
except ImportError:
    HAVE_NUMBA = False

pytestmark = pytest.mark.skipif(not HAVE_NUMBA, reason="numba unavailable")

RNG = np.random.default_rng(42)


def cplx(n):
    return RNG.standard_normal(n) + 1j * RNG.standard_normal(n)


def test_phase_ramp_mul_matches():
    x = cplx(5000)
    a = numpy_ref.phase_ramp_mul(x, 1.234e-3, 0.5)
    b = numba_jit.phase_ramp_mul(x, 1.234e-3, 0.5)
    np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-12)


def test_laser_wave_matches():
    inc = RNG.standard_normal(5000) * 1e-3
    a = numpy_ref.laser_wave(inc, 2.2e-4, 0.7)
    b = numba_jit.laser_wave(inc, 2.2e-4, 0.7)
    np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-12)


def test_mix_conj_matches():
    x, lo = cplx(4000), np.exp(1j * RNG.standard_normal(4000))
    np.testing.assert_allclose(
        numpy_ref.mix_conj(x, lo), numba_jit.mix_conj(x, lo), rtol=1e-14
    )


def test_butterfly_fir_matches():
    ex, ey = cplx(2048), cplx(2048)
    taps = [cplx(15) * 0.2 for _ in range(4)]
    ax, ay = numpy_ref.butterfly_fir(ex, ey, *taps)
    bx, by = numba_jit.butterfly_fir(ex, ey, *taps)
    np.testing.assert_allclose(ax, bx, rtol=1e-11, atol=1e-12)
    np.testing.assert_allclose(ay, by, rtol=1e-11, atol=1e-12)


def test_butterfly_identity_passthrough():
    ex, ey = cplx(512), cplx(512)
    e = np.zeros(15, dtype=np.complex128)
    one = e.copy()
    one[7] = 1.0
    ox, oy = numba_jit.butterfly_fir(ex, ey, one, e, e, one)
    np.testing.assert_allclose(ox, ex, rtol=1e-14)
    np.testing.assert_allclose(oy, ey, rtol=1e-14)


def test_quantize_matches_and_is_symmetric():
    x = RNG.standard_normal(20000) * 0.5
    a = numpy_ref.quantize_midrise(x, 1.0 / 32, 32)
    b = numba_jit.quantize_midrise(x, 1.0 / 32, 32)
    np.testing.assert_allclose(a, b, rtol=0, atol=0)
    neg = numba_jit.quantize_midrise(-x, 1.0 / 32, 32)
    np.testing.assert_allclose(neg, -b, rtol=0, atol=1e-15)


def test_pilot_phase_correct_matches():
    sym = cplx(3000)
    pos = np.arange(10, 3000, 33, dtype=np.int64)
    phase = np.cumsum(RNG.standard_normal(pos.size) * 0.05)
    a = numpy_ref.pilot_phase_correct(sym, pos, phase)
    b = numba_jit.pilot_phase_correct(sym, pos, phase)
    np.testing.assert_allclose(a, b, rtol=1e-11, atol=1e-12)


def test_env_flag_selects_numpy_backend():
    env = dict(os.environ, CPONSIM_NUMBA="0")
    out = subprocess.run(
        [sys.executable, "-c", "from cponsim.kernels import BACKEND; print(BACKEND)"],
        capture_output=True,
        text=True,
        env=env,
        check=True,
    )
    assert out.stdout.strip() == "numpy"


def test_default_backend_is_numba_when_available():
    env = {k: v for k, v in os.environ.items() if k != "CPONSIM_NUMBA"}
    out = subprocess.run(
        [sys.executable, "-c", "from cponsim.kernels import BACKEND; print(BACKEND)"],
        capture_output=True,
        text=True,
        env=env,
        check=True,
    )
    assert out.stdout.strip() == "numba"
