"""Sequential hot loops, compiled with numba when available.

Each kernel exists once as a plain-python implementation; the public name
binds either that or its ``numba.njit`` compilation depending on the
``FLUXLOCK_DISABLE_NUMBA`` environment variable.  All randomness is
pregenerated by the caller, so both backends produce bit-identical output.
"""

from __future__ import annotations

import math
import os

import numpy as np

__all__ = [
    "KERNEL_BACKEND",
    "nonlinear_path",
    "nonlinear_path_batch",
    "feedback_loop",
    "nonlinear_path_py",
    "nonlinear_path_batch_py",
    "feedback_loop_py",
]


# --------------------------------------------------------------------------
# deterministic trig
#
# The feedback kernel rotates a phasor once per step, with the angle fed
# back from the loop state, so sin/cos sit inside the sequential loop.
# CPython's libm and the library numba links can disagree in the last ulp
# for some arguments, which would make the two backends drift apart.  To
# keep them bit-identical the kernel carries its own sin/cos: an exact
# fmod into (-2pi, 2pi), a two-constant quadrant reduction, and the
# classic fdlibm minimax polynomials.  Every operation below is a plain
# IEEE add/sub/mul, so both backends — and any machine — produce the same
# bits.  Worst-case error is a couple of ulp, identical on both paths.

_TWO_PI = 6.283185307179586
_TWO_OVER_PI = 0.6366197723675814
_PI = 3.141592653589793
_PIO2_1 = 1.5707963267341256  # first 33 bits of pi/2
_PIO2_1T = 6.077100506506192e-11  # pi/2 - _PIO2_1, rounded

_S1 = -1.66666666666666324348e-01
_S2 = 8.33333333332248946124e-03
_S3 = -1.98412698298579493134e-04
_S4 = 2.75573137070700676789e-06
_S5 = -2.50507602534068634195e-08
_S6 = 1.58969099521155010221e-10

_C1 = 4.16666666666666019037e-02
_C2 = -1.38888888888741095749e-03
_C3 = 2.48015872894767294178e-05
_C4 = -2.75573143513906633035e-07
_C5 = 2.08757232129817482790e-09
_C6 = -1.13596475577881948265e-11


def _sincos_impl(x):
    if not math.isfinite(x):
        return (math.nan, math.nan)
    # float % is fmod plus a sign fixup, both exact IEEE steps with the
    # same definition in the interpreter and the compiler
    y = x % _TWO_PI
    if y > _PI:
        y = y - _TWO_PI
    k = int(math.floor(y * _TWO_OVER_PI + 0.5))
    kf = float(k)
    r = (y - kf * _PIO2_1) - kf * _PIO2_1T
    z = r * r
    s = r + r * z * (_S1 + z * (_S2 + z * (_S3 + z * (_S4 + z * (_S5 + z * _S6)))))
    c = 1.0 - 0.5 * z + z * z * (_C1 + z * (_C2 + z * (_C3 + z * (_C4 + z * (_C5 + z * _C6)))))
    if k == 0:
        return (s, c)
    if k == 1:
        return (c, -s)
    if k == -1:
        return (-c, s)
    return (-s, -c)  # |k| == 2


_sincos = _sincos_impl  # rebound to its compiled form when numba is active


def _nonlinear_path_impl(a_init, noise, lin, sat, dt, guard):
    # One Euler-Maruyama pass of the saturable-gain oscillator:
    #   da = (lin - sat*|a|^2) a dt + noise
    # noise[k] is the full (already scaled) complex increment for step k.
    n = noise.shape[0]
    out = np.empty(n, np.complex128)
    a = a_init
    bad = -1
    for k in range(n):
        mag2 = a.real * a.real + a.imag * a.imag
        a = a + (lin - sat * mag2) * a * dt + noise[k]
        out[k] = a
        if bad < 0 and not (mag2 < guard):
            bad = k
    return out, bad


def _nonlinear_path_batch_impl(a_init, noise, lin, sat, dt, guard):
    # Independent members along axis 0; returns first bad index per member.
    m, n = noise.shape
    out = np.empty((m, n), np.complex128)
    bad = np.full(m, -1, np.int64)
    for j in range(m):
        a = a_init[j]
        for k in range(n):
            mag2 = a.real * a.real + a.imag * a.imag
            a = a + (lin - sat * mag2) * a * dt + noise[j, k]
            out[j, k] = a
            if bad[j] < 0 and not (mag2 < guard):
                bad[j] = k
    return out, bad


def _feedback_loop_impl(
    master,
    vacuum,
    w1,
    w2,
    dphi,
    a0,
    r,
    t,
    gain,
    delay_steps,
    alpha,
    lead_over_dt,
    dt,
    guard,
):
    # Co-simulation of a diffusing source and the loop acting back on it.
    # Per step: advance the phase by its own increment plus the standing
    # frequency correction, tap the beam, beat the tap against the master
    # arm, then delay / one-pole filter / lead the error and refresh the
    # correction for the next step.
    n = master.shape[0]
    c = np.empty(n, np.complex128)
    e = np.empty(n, np.float64)
    corr = np.empty(n, np.float64)
    theta = np.empty(n, np.float64)
    ph = 0.0
    u = 0.0
    y = 0.0
    total = 0.0
    crossed = -1
    # Complex products are spelled out as real scalar operations (numpy's
    # scalar complex kernels may fuse multiply-adds) and the rotation uses
    # the module's own sin/cos; both are needed for the python and
    # compiled backends to agree bit for bit.
    for k in range(n):
        ph = ph + dphi[k] + u * dt
        sph, cph = _sincos(ph)
        s_re = a0 + w1[k]
        s_im = w2[k]
        a_re = s_re * cph - s_im * sph
        a_im = s_re * sph + s_im * cph
        v_re = vacuum[k].real
        v_im = vacuum[k].imag
        d_re = r * a_re + t * v_re
        d_im = r * a_im + t * v_im
        ek = master[k].real * d_im - master[k].imag * d_re
        e[k] = ek
        theta[k] = ph
        c[k] = complex(t * a_re - r * v_re, t * a_im - r * v_im)
        idx = k - delay_steps
        sample = e[idx] if idx >= 0 else 0.0
        y_prev = y
        y = y + alpha * (sample - y)
        z = y + lead_over_dt * (y - y_prev)
        u = -gain * z
        total += u * dt
        corr[k] = total
        if crossed < 0 and not (abs(ek) < guard):
            crossed = k
    return c, e, corr, theta, crossed


def _want_numba() -> bool:
    flag = os.environ.get("FLUXLOCK_DISABLE_NUMBA", "0").strip().lower()
    return flag in ("", "0", "false", "no")


nonlinear_path_py = _nonlinear_path_impl
nonlinear_path_batch_py = _nonlinear_path_batch_impl
feedback_loop_py = _feedback_loop_impl

KERNEL_BACKEND = "python"
if _want_numba():
    try:
        from numba import njit
    except ImportError:  # pragma: no cover - numba is a declared dependency
        njit = None
    if njit is not None:
        _sincos = njit(cache=True)(_sincos_impl)
        nonlinear_path_jit = njit(cache=True)(_nonlinear_path_impl)
        nonlinear_path_batch_jit = njit(cache=True)(_nonlinear_path_batch_impl)
        feedback_loop_jit = njit(cache=True)(_feedback_loop_impl)
        KERNEL_BACKEND = "numba"

if KERNEL_BACKEND == "numba":
    nonlinear_path = nonlinear_path_jit
    nonlinear_path_batch = nonlinear_path_batch_jit
    feedback_loop = feedback_loop_jit
else:
    nonlinear_path = nonlinear_path_py
    nonlinear_path_batch = nonlinear_path_batch_py
    feedback_loop = feedback_loop_py
