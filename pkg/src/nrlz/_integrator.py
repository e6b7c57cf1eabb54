"""Jitted embedded Runge-Kutta kernel for the two-mode Schrodinger equation.

Kept separate from :mod:`nrlz.dynamics` so the Python-level API stays
readable; everything in here is numba ``nopython`` code operating on plain
scalars and arrays.  Two Dormand-Prince pairs are available: DOP853 (the
default; tableau borrowed from scipy) and the classic 5(4) pair.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit
from scipy.integrate._ivp import dop853_coefficients as _d853

STATUS_OK = 0
STATUS_STEP_UNDERFLOW = 1
STATUS_NONFINITE = 2


class Tableau:
    def __init__(self, name, a, b, c, e_high, e_low, order):
        self.name = name
        self.a = np.ascontiguousarray(a, dtype=np.float64)
        self.b = np.ascontiguousarray(b, dtype=np.float64)
        self.c = np.ascontiguousarray(c, dtype=np.float64)
        self.e_high = np.ascontiguousarray(e_high, dtype=np.float64)
        self.e_low = np.ascontiguousarray(e_low, dtype=np.float64)
        # exponent used in the step-size controller
        self.exponent = -1.0 / order


_n = _d853.N_STAGES
DOP853 = Tableau(
    "dop853",
    _d853.A[:_n, :_n],
    _d853.B,
    _d853.C[:_n],
    _d853.E5,
    _d853.E3,
    8,
)

_A5 = np.zeros((6, 6))
_A5[1, 0] = 1 / 5
_A5[2, :2] = [3 / 40, 9 / 40]
_A5[3, :3] = [44 / 45, -56 / 15, 32 / 9]
_A5[4, :4] = [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729]
_A5[5, :5] = [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656]
DOPRI5 = Tableau(
    "dopri5",
    _A5,
    [35 / 384, 0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
    [0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1],
    [71 / 57600, 0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40],
    np.zeros(7),
    5,
)

TABLEAUS = {"dop853": DOP853, "dopri5": DOPRI5}


@njit(cache=True)
def rhs(a, b, gamma, v, c, delta):
    na = a.real * a.real + a.imag * a.imag
    nb = b.real * b.real + b.imag * b.imag
    h11 = 0.5 * gamma + 0.5 * c * (nb - na) / (na + nb)
    da = -1j * (h11 * a + 0.5 * v * b)
    db = -1j * (0.5 * v * (1.0 - delta) * a - h11 * b)
    return da, db


@njit(cache=True)
def integrate_kernel(a0, b0, log0, gamma0, rate, v, c, delta, t_samples, tol,
                     h_min, rescale_low, rescale_high, A, B, C, EH, EL, expo):
    """Integrate from ``t_samples[0]`` through every sample time.

    ``gamma(t) = gamma0 + rate * t``.  Steps are clipped to land on sample
    times exactly.  The local error is measured relative to the current
    amplitude norm.  Returns sampled raw amplitudes, log-scales, a status
    code, the time of failure (if any) and step counters.
    """
    n = t_samples.shape[0]
    ns = B.shape[0]
    ka = np.zeros(ns + 1, dtype=np.complex128)
    kb = np.zeros(ns + 1, dtype=np.complex128)
    out_a = np.zeros(n, dtype=np.complex128)
    out_b = np.zeros(n, dtype=np.complex128)
    out_log = np.zeros(n, dtype=np.float64)
    use_low = False
    for j in range(EL.shape[0]):
        if EL[j] != 0.0:
            use_low = True
    a = a0
    b = b0
    logs = log0
    t = t_samples[0]
    out_a[0] = a
    out_b[0] = b
    out_log[0] = logs
    n_steps = 0
    n_rejected = 0

    fa, fb = rhs(a, b, gamma0 + rate * t, v, c, delta)
    h = 0.01 / (1.0 + abs(gamma0 + rate * t) + v + abs(c))
    for i in range(1, n):
        t_target = t_samples[i]
        while t < t_target:
            last = False
            if t + h >= t_target:
                hh = t_target - t
                last = True
            else:
                hh = h
            g0 = gamma0 + rate * t
            ka[0] = fa
            kb[0] = fb
            for s in range(1, ns):
                da = 0j
                db = 0j
                for j in range(s):
                    da += A[s, j] * ka[j]
                    db += A[s, j] * kb[j]
                ka[s], kb[s] = rhs(a + hh * da, b + hh * db, g0 + rate * C[s] * hh, v, c, delta)
            sa = 0j
            sb = 0j
            for j in range(ns):
                sa += B[j] * ka[j]
                sb += B[j] * kb[j]
            an = a + hh * sa
            bn = b + hh * sb
            ka[ns], kb[ns] = rhs(an, bn, g0 + rate * hh, v, c, delta)
            ha = 0j
            hb = 0j
            la = 0j
            lb = 0j
            for j in range(ns + 1):
                ha += EH[j] * ka[j]
                hb += EH[j] * kb[j]
                la += EL[j] * ka[j]
                lb += EL[j] * kb[j]
            norm_old = math.sqrt(abs(a) ** 2 + abs(b) ** 2)
            norm_new = math.sqrt(abs(an) ** 2 + abs(bn) ** 2)
            scale = tol * max(norm_old, norm_new)
            e_high2 = (abs(ha) ** 2 + abs(hb) ** 2) / (scale * scale)
            if use_low:
                e_low2 = (abs(la) ** 2 + abs(lb) ** 2) / (scale * scale)
                if e_high2 == 0.0 and e_low2 == 0.0:
                    err = 0.0
                else:
                    err = hh * e_high2 / math.sqrt(e_high2 + 0.01 * e_low2)
            else:
                err = hh * math.sqrt(e_high2)
            if not math.isfinite(err):
                return out_a, out_b, out_log, STATUS_NONFINITE, t, n_steps, n_rejected
            if err <= 1.0:
                t = t_target if last else t + hh
                a = an
                b = bn
                fa = ka[ns]
                fb = kb[ns]
                n_steps += 1
                n2 = norm_new * norm_new
                if n2 < rescale_low or n2 > rescale_high:
                    a = a / norm_new
                    b = b / norm_new
                    fa = fa / norm_new
                    fb = fb / norm_new
                    logs += math.log(norm_new)
                if not last:
                    if err == 0.0:
                        h = hh * 10.0
                    else:
                        h = hh * min(10.0, max(0.2, 0.9 * err ** expo))
                    if h < h_min:
                        return (out_a, out_b, out_log, STATUS_STEP_UNDERFLOW, t,
                                n_steps, n_rejected)
            else:
                n_rejected += 1
                h = hh * max(0.2, 0.9 * err ** expo)
                if h < h_min:
                    return (out_a, out_b, out_log, STATUS_STEP_UNDERFLOW, t,
                            n_steps, n_rejected)
        out_a[i] = a
        out_b[i] = b
        out_log[i] = logs
    return out_a, out_b, out_log, STATUS_OK, t, n_steps, n_rejected
