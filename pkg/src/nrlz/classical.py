"""Reduced (s, theta) dynamics on the classical cylinder.

    ds/dt     = (v/2) (delta - 2) sqrt(1 - s^2) sin(theta)
    dtheta/dt = gamma + c s + v [(1+s) - (1-delta)(1-s)] cos(theta) / (2 sqrt(1 - s^2))

Fixed points lie on sin(theta) = 0 and coincide with the real nonlinear
eigenstates of :mod:`nrlz.spectrum`.  For ``delta == 0`` the flow is
Hamiltonian with canonical pair (s, theta); otherwise it is not, and orbits
are defined by the flow alone.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import DOP853, quad
from scipy.optimize import brentq, minimize_scalar

from .exceptions import HomoclinicTraceError, PhaseSpaceBoundaryError, ValidationError
from .model import ModelParams, ReducedState
from .spectrum import loop_window, stationary_imbalances

BOUNDARY = 1.0 - 1e-12
TWO_PI = 2.0 * math.pi


def _h(s, delta):
    return ((1.0 + s) - (1.0 - delta) * (1.0 - s)) / (2.0 * math.sqrt(1.0 - s * s))


def _h_prime(s, delta):
    return ((2.0 - delta) + delta * s) / (2.0 * (1.0 - s * s) ** 1.5)


def _field(s: float, theta: float, gamma: float, params: ModelParams) -> tuple[float, float]:
    if abs(s) >= BOUNDARY:
        raise PhaseSpaceBoundaryError(f"phase-space boundary reached (s={s!r})")
    v, c, d = params.v, params.c, params.delta
    root = math.sqrt(1.0 - s * s)
    s_dot = 0.5 * v * (d - 2.0) * root * math.sin(theta)
    theta_dot = gamma + c * s + v * _h(s, d) * math.cos(theta)
    return s_dot, theta_dot


def reduced_rhs(state: ReducedState, gamma: float, params: ModelParams) -> tuple[float, float]:
    """``(ds/dt, dtheta/dt)`` at ``state``."""
    return _field(state.s, state.theta, gamma, params)


def jacobian(s: float, theta: float, gamma: float, params: ModelParams) -> np.ndarray:
    """Analytic linearization ``d(s_dot, theta_dot)/d(s, theta)``."""
    if abs(s) >= BOUNDARY:
        raise PhaseSpaceBoundaryError(f"phase-space boundary reached (s={s!r})")
    v, c, d = params.v, params.c, params.delta
    root = math.sqrt(1.0 - s * s)
    sin, cos = math.sin(theta), math.cos(theta)
    return np.array(
        [
            [-0.5 * v * (d - 2.0) * s / root * sin, 0.5 * v * (d - 2.0) * root * cos],
            [c + v * _h_prime(s, d) * cos, -v * _h(s, d) * sin],
        ]
    )


def divergence_check(state: ReducedState, gamma: float, params: ModelParams) -> float:
    """Phase-space divergence ``d(s_dot)/ds + d(theta_dot)/dtheta``.

    Identically zero for ``delta == 0`` (area-preserving flow); any nonzero
    value means the reduced system is not Hamiltonian.
    """
    j = jacobian(state.s, state.theta, gamma, params)
    return float(j[0, 0] + j[1, 1])


# ---------------------------------------------------------------------------
# fixed points


@dataclass(frozen=True)
class FixedPoint:
    s: float
    theta: float
    eigenvalues: tuple[complex, complex]
    stability: str

    @property
    def eta(self) -> int:
        return 1 if math.cos(self.theta) > 0 else -1


def classify(eigenvalues, scale: float = 1.0) -> str:
    """center | saddle | spiral-in | spiral-out | degenerate.

    Real same-sign pairs (nodes) are reported with the spiral label of the
    matching direction.
    """
    tol = 1e-9 * max(scale, 1.0)
    l1, l2 = eigenvalues
    if abs(l1) <= tol and abs(l2) <= tol:
        return "degenerate"
    re1, re2 = l1.real, l2.real
    if abs(re1) <= tol and abs(re2) <= tol:
        return "center"
    if re1 * re2 < 0 and abs(l1.imag) <= tol:
        return "saddle"
    if re1 + re2 < 0:
        return "spiral-in"
    if re1 + re2 > 0:
        return "spiral-out"
    return "degenerate"


def find_fixed_points(gamma: float, params: ModelParams) -> list[FixedPoint]:
    """Fixed points on theta in {0, pi}, classified by their linearization.

    At ``delta == 2`` the s-equation vanishes identically; points are still
    returned but all carry the ``degenerate`` label.
    """
    out = []
    scale = 1.0 + abs(gamma) + abs(params.c) + params.v
    for eta, theta in ((1, 0.0), (-1, math.pi)):
        for s in stationary_imbalances(gamma, params, eta):
            eig = np.linalg.eigvals(jacobian(s, theta, gamma, params))
            pair = (complex(eig[0]), complex(eig[1]))
            label = "degenerate" if params.delta == 2.0 else classify(pair, scale)
            out.append(FixedPoint(float(s), theta, pair, label))
    out.sort(key=lambda fp: (fp.theta, fp.s))
    return out


# ---------------------------------------------------------------------------
# orbits


@dataclass(frozen=True)
class Orbit:
    """Traced orbit; ``points[:, 1]`` holds the unwrapped theta.

    ``action`` is ``(1/2pi) * oint s dtheta`` with the contour closed by a
    straight segment to the start point (shifted by the net winding for
    orbits that go around the cylinder).
    """

    points: np.ndarray
    times: np.ndarray
    termination: str
    closed: bool
    action: float
    winding: int

    @property
    def theta_mod(self) -> np.ndarray:
        return np.mod(self.points[:, 1], TWO_PI)


def _contour_action(points: np.ndarray) -> tuple[float, int]:
    s, th = points[:, 0], points[:, 1]
    k = int(round((th[-1] - th[0]) / TWO_PI))
    integral = float(np.trapezoid(s, th))
    integral += 0.5 * (s[-1] + s[0]) * (th[0] + TWO_PI * k - th[-1])
    return integral / TWO_PI, k


def _periodic_distance(p, q) -> float:
    dth = (p[1] - q[1] + math.pi) % TWO_PI - math.pi
    return math.hypot(p[0] - q[0], dth)


def _trace(y0, gamma, params, max_time, anchor, return_radius, leave_radius,
           samples_per_step, rtol, atol):
    def fun(t, y):
        return np.array(_field(y[0], y[1], gamma, params))

    times = [0.0]
    pts = [np.asarray(y0, dtype=float)]
    try:
        solver = DOP853(fun, 0.0, pts[0], max_time, rtol=rtol, atol=atol)
    except PhaseSpaceBoundaryError:
        # the initial-step probe already left the cylinder
        return np.array(times), np.array(pts), "escape"
    theta0 = float(y0[1])
    dists = [_periodic_distance(y0, anchor)]
    left = dists[0] > leave_radius
    prev_dense = None
    while True:
        if solver.status != "running":
            return np.array(times), np.array(pts), "max_time"
        try:
            msg = solver.step()
        except PhaseSpaceBoundaryError:
            return np.array(times), np.array(pts), "escape"
        if solver.status == "failed":
            return np.array(times), np.array(pts), "escape" if msg else "failed"
        dense = solver.dense_output()
        t_old, t_new = solver.t_old, solver.t

        def path(x, dense=dense, prev=prev_dense, t_old=t_old):
            return dense(x) if (x >= t_old or prev is None) else prev(x)

        def gap(x):
            return _periodic_distance(path(x), anchor)

        for tau in np.linspace(t_old, t_new, samples_per_step + 1)[1:]:
            y = dense(tau)
            if abs(y[0]) >= BOUNDARY:
                return np.array(times), np.array(pts), "escape"
            if abs(y[1] - theta0) >= TWO_PI:
                target = theta0 + math.copysign(TWO_PI, y[1] - theta0)
                tc = brentq(lambda x: path(x)[1] - target, times[-1], tau, xtol=1e-14)
                yc = path(tc)
                yc[1] = target
                times.append(tc)
                pts.append(yc)
                return np.array(times), np.array(pts), "unwrapped"
            dist = _periodic_distance(y, anchor)
            if dist > leave_radius:
                left = True
            if left:
                hit = None
                if dist < return_radius:
                    hit = (times[-1], float(tau))
                elif len(times) >= 2 and dists[-1] < dists[-2] and dists[-1] < dist:
                    # closest approach fell between samples; refine it
                    lo, hi = times[-2], float(tau)
                    res = minimize_scalar(gap, bounds=(lo, hi), method="bounded",
                                          options={"xatol": 1e-13})
                    if res.fun < return_radius:
                        hit = (lo, float(res.x))
                if hit is not None:
                    tc = brentq(lambda x: gap(x) - return_radius, hit[0], hit[1], xtol=1e-14)
                    keep = [i for i, t in enumerate(times) if t < tc]
                    times = [times[i] for i in keep] + [tc]
                    pts = [pts[i] for i in keep] + [path(tc)]
                    return np.array(times), np.array(pts), "returned"
            times.append(float(tau))
            pts.append(y)
            dists.append(dist)
        prev_dense = dense


def trace_frozen_orbit(start: ReducedState, gamma: float, params: ModelParams,
                       max_time: float = 1e3, samples_per_step: int = 16,
                       return_radius: float = 1e-4, rtol: float = 1e-11) -> Orbit:
    """Follow the flow at fixed gamma until theta advances by 2pi, the orbit
    comes back within ``return_radius`` of the start, or ``max_time``.

    Boundary contact (|s| -> 1) ends the trace with termination ``escape``.
    """
    if not abs(start.s) < 1.0:
        raise ValidationError("|s_start| must be < 1")
    y0 = (start.s, start.theta)
    times, pts, why = _trace(y0, gamma, params, max_time, y0, return_radius,
                             10.0 * return_radius, samples_per_step, rtol, 1e-14)
    action, k = _contour_action(pts)
    end_gap = _periodic_distance(pts[-1], y0)
    closed = why == "returned" or (why == "unwrapped" and end_gap <= return_radius)
    return Orbit(pts, times, why, closed, action, k)


# ---------------------------------------------------------------------------
# homoclinic orbit and canonical action


@dataclass(frozen=True)
class HomoclinicResult:
    gamma_star: float
    s_star: float
    theta_star: float
    I_c: float
    p_c_ad: float
    orbit: Orbit
    closure_error: float


def homoclinic_action(params: ModelParams, displacement: float = 1e-6,
                      ball_radius: float = 1e-4, max_time: float = 1e5,
                      samples_per_step: int = 16) -> HomoclinicResult:
    """Canonical action of the homoclinic orbit at the upper loop terminal.

    The orbit is traced from the merged fixed point displaced by
    ``displacement`` along its most unstable direction.  For an orbit that
    winds around the cylinder, ``I_c`` is the area between the orbit and the
    ``s = 1`` edge divided by 2pi; for a contractible loop it is the enclosed
    area divided by 2pi.  ``p_c_ad = I_c / 2``.
    """
    window = loop_window(params)
    if window is None:
        raise ValidationError("no loop for these parameters: I_c undefined")
    fold = window.upper_fold()
    gamma = float(fold.gamma)
    theta_star = 0.0 if fold.eta > 0 else math.pi
    s_star = float(fold.s)
    eig, vecs = np.linalg.eig(jacobian(s_star, theta_star, gamma, params))
    direction = np.real(vecs[:, int(np.argmax(eig.real))])
    direction = direction / np.linalg.norm(direction)
    if direction[0] < 0:
        direction = -direction
    y0 = (s_star + displacement * direction[0], theta_star + displacement * direction[1])
    anchor = (s_star, theta_star)
    times, pts, why = _trace(y0, gamma, params, max_time, anchor, ball_radius,
                             10.0 * ball_radius, samples_per_step, 1e-11, 1e-14)
    if why not in ("unwrapped", "returned"):
        raise HomoclinicTraceError(f"homoclinic trace failed ({why}) at gamma={gamma!r}")
    action, k = _contour_action(pts)
    orbit = Orbit(pts, times, why, True, action, k)
    i_c = abs(k - action) if k != 0 else abs(action)
    closure = _periodic_distance(pts[-1], anchor)
    return HomoclinicResult(gamma, s_star, theta_star, float(i_c), float(i_c) / 2.0, orbit, closure)


# ---------------------------------------------------------------------------
# delta = 0 conserved energy (validation oracle)


def classical_energy(state: ReducedState, gamma: float, params: ModelParams) -> float:
    """Conserved function of the reciprocal (``delta == 0``) flow, built by
    quadrature of the vector field: along theta at s = 0, then along s.

    Orbits of the ``delta == 0`` system are its level sets, up to an additive
    constant fixed by ``E(0, 0) = 0``.
    """
    if params.delta != 0.0:
        raise ValidationError("the reduced flow is only conservative at delta == 0")

    def along_theta(th):
        return -_field(0.0, th, gamma, params)[0]

    def along_s(s):
        return _field(s, state.theta, gamma, params)[1]

    e0 = quad(along_theta, 0.0, state.theta, epsabs=1e-14, epsrel=1e-13, limit=200)[0]
    e1 = quad(along_s, 0.0, state.s, epsabs=1e-14, epsrel=1e-13, limit=200)[0]
    return e0 + e1
