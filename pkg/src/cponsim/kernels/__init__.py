"""Backend selection for the hot numeric kernels.

The simulator ships two implementations of its inner-loop kernels: JIT
versions built on numba (:mod:`cponsim.kernels.numba_jit`) and a pure-numpy
reference path (:mod:`cponsim.kernels.numpy_ref`).  The numba path is used
by default when numba imports cleanly; set ``CPONSIM_NUMBA=0`` in the
environment to force the numpy path.  ``benchmarks/kernel_bench.py``
compares the two.
"""

import os

from . import numpy_ref

_want_numba = os.environ.get("CPONSIM_NUMBA", "1") != "0"

if _want_numba:
    try:
        from . import numba_jit as _impl

        BACKEND = "numba"
    except ImportError:
        _impl = numpy_ref
        BACKEND = "numpy"
else:
    _impl = numpy_ref
    BACKEND = "numpy"

phase_ramp_mul = _impl.phase_ramp_mul
laser_wave = _impl.laser_wave
mix_conj = _impl.mix_conj
butterfly_fir = _impl.butterfly_fir
quantize_midrise = _impl.quantize_midrise
pilot_phase_correct = _impl.pilot_phase_correct

__all__ = [
    "BACKEND",
    "phase_ramp_mul",
    "laser_wave",
    "mix_conj",
    "butterfly_fir",
    "quantize_midrise",
    "pilot_phase_correct",
]
