"""Adiabatic levels and eigenstates.

Linear case (``c == 0``): closed-form levels, eigenvectors and exceptional
points.  Nonlinear case: the monic quartic for the level energies is used
for counting and cross-checking only; the physical eigenstates come from
the stationarity condition of the reduced phase equation,

    g(s) = gamma + c*s + eta*v*[(1+s) - (1-delta)*(1-s)] / (2*sqrt(1-s^2)) = 0,

with real amplitudes ``a = sqrt((1-s)/2)``, ``b = eta*sqrt((1+s)/2)``.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from .exceptions import EigenstateSearchError, LoopBoundaryError, ValidationError
from .model import ModelParams, QuantumState

S_EDGE = 1e-6
GRID_POINTS = 2001
RESIDUAL_TOL = 1e-8
QUARTIC_MATCH_TOL = 1e-6
IMAG_SNAP = 1e-9


# ---------------------------------------------------------------------------
# linear spectrum


@dataclass(frozen=True)
class LinearSpectrum:
    gamma: float
    eps_plus: complex
    eps_minus: complex
    vec_plus: np.ndarray
    vec_minus: np.ndarray
    at_ep: bool

    def lower(self) -> tuple[complex, np.ndarray]:
        """(energy, vector) of the level with the smaller real part."""
        if (self.eps_plus.real, self.eps_plus.imag) < (self.eps_minus.real, self.eps_minus.imag):
            return self.eps_plus, self.vec_plus
        return self.eps_minus, self.vec_minus

    def upper(self) -> tuple[complex, np.ndarray]:
        if (self.eps_plus.real, self.eps_plus.imag) < (self.eps_minus.real, self.eps_minus.imag):
            return self.eps_minus, self.vec_minus
        return self.eps_plus, self.vec_plus


@dataclass(frozen=True)
class EpInfo:
    gamma_eps: tuple[float, float]
    vectors: tuple[np.ndarray, np.ndarray]


def _require_linear(params: ModelParams, hint: str) -> None:
    if params.c != 0.0:
        raise ValidationError(hint)


def _discriminant(gamma: float, v: float, delta: float) -> float:
    return gamma * gamma + v * v * (1.0 - delta)


def _mean_field_eigvecs(gamma_eff: float, v: float, delta: float):
    """Eigenpairs of [[g/2, v/2], [v(1-delta)/2, -g/2]] in the ``(x, 1)`` gauge.

    Each of the two algebraically equal forms of ``x`` is picked where it
    avoids cancellation.
    """
    r = cmath.sqrt(_discriminant(gamma_eff, v, delta))
    vd = v * (1.0 - delta)

    def component(root):
        num, den = gamma_eff + root, gamma_eff - root
        if abs(num) >= abs(den):
            return num / vd
        return -v / den

    x_plus = component(r)
    x_minus = component(-r)
    return (
        0.5 * r,
        -0.5 * r,
        np.array([x_plus, 1.0], dtype=complex),
        np.array([x_minus, 1.0], dtype=complex),
        r,
    )


def linear_spectrum(gamma: float, params: ModelParams) -> LinearSpectrum:
    """Closed-form levels ``+-sqrt(gamma^2 + v^2(1-delta))/2`` and eigenvectors."""
    _require_linear(params, "use nonlinear_levels for c != 0")
    v, delta = params.v, params.delta
    if delta == 1.0:
        vec_plus = np.array([1.0, 0.0], dtype=complex)
        if gamma == 0.0:
            vec_minus = vec_plus.copy()
        else:
            vec_minus = np.array([-v / (2.0 * gamma), 1.0], dtype=complex)
        return LinearSpectrum(
            gamma, complex(0.5 * gamma), complex(-0.5 * gamma), vec_plus, vec_minus, gamma == 0.0
        )
    ep, em, vp, vm, r = _mean_field_eigvecs(gamma, v, delta)
    scale = gamma * gamma + v * v
    at_ep = abs(_discriminant(gamma, v, delta)) <= 1e-12 * scale
    return LinearSpectrum(gamma, complex(ep), complex(em), vp, vm, bool(at_ep))


def ep_locations(params: ModelParams) -> EpInfo | None:
    """Exceptional points ``+-v*sqrt(delta-1)`` with their coalesced vectors."""
    _require_linear(params, "use loop_window for c != 0")
    d = params.delta
    if d < 1.0:
        return None
    g = params.v * math.sqrt(d - 1.0)
    tail = math.sqrt(d - 1.0) / math.sqrt(d)
    left = np.array([1.0 / math.sqrt(d), tail])
    right = np.array([-1.0 / math.sqrt(d), tail])
    return EpInfo((-g, g), (left, right))


def _bisect_predicate(pred, lo: float, hi: float) -> float:
    """Boundary of a boolean predicate with ``pred(lo) != pred(hi)``, to one ulp."""
    p_lo = pred(lo)
    while True:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            return hi if abs(hi) < abs(lo) else lo
        if pred(mid) == p_lo:
            lo = mid
        else:
            hi = mid


def detect_branch_switches(params: ModelParams, gamma_min: float, gamma_max: float,
                           n: int = GRID_POINTS) -> np.ndarray:
    """Locate exceptional points by scanning :func:`linear_spectrum`.

    Real/complex transitions of the level pair are bisected to machine
    precision.  Coalescences without a transition (the ``delta == 1``
    crossing) are found by minimizing the level splitting around grid minima.
    """
    _require_linear(params, "branch switches are defined for c == 0")
    grid = np.linspace(gamma_min, gamma_max, n)

    def is_complex(g):
        return linear_spectrum(g, params).eps_plus.imag != 0.0

    def splitting(g):
        s = linear_spectrum(g, params)
        return abs(s.eps_plus - s.eps_minus)

    flags = [is_complex(g) for g in grid]
    found = []
    for i in range(n - 1):
        if flags[i] != flags[i + 1]:
            found.append(_bisect_predicate(is_complex, grid[i], grid[i + 1]))
    split = np.array([splitting(g) for g in grid])
    spacing = (gamma_max - gamma_min) / (n - 1)
    for i in range(n):
        left = split[i - 1] if i > 0 else math.inf
        right = split[i + 1] if i < n - 1 else math.inf
        if split[i] <= left and split[i] <= right and split[i] <= 2.0 * spacing:
            lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, n - 1)]
            res = minimize_scalar(splitting, bounds=(lo, hi), method="bounded",
                                  options={"xatol": 1e-15, "maxiter": 500})
            cand = float(res.x)
            if split[i] == 0.0:
                cand = float(grid[i])
            if splitting(cand) <= 1e-10 * (1.0 + abs(cand)):
                if all(abs(cand - f) > 1e-9 for f in found):
                    found.append(cand)
    return np.array(sorted(found))


# ---------------------------------------------------------------------------
# quartic


def quartic_coefficients(gamma: float, params: ModelParams) -> tuple[float, float, float, float, float]:
    """Monic quartic ``eps^4 + c eps^3 + A eps^2 + B eps + D`` for the levels."""
    v, c, d, g = params.v, params.c, params.delta, gamma
    v2 = v * v
    a = (4 * c * c - 4 * g * g - v2 * (4 - 4 * d - d * d)) / 16
    b = c * v2 * (d - 1) / 4
    dd = (-c * c * v2 * (4 - 4 * d + d * d) + 2 * c * v2 * d * g * (2 - d)
          - v2 * d * d * (g * g + v2 - v2 * d)) / 64
    return (1.0, c, a, b, dd)


def _horner(coeffs, x):
    p = 0j
    dp = 0j
    for k in coeffs:
        dp = dp * x + p
        p = p * x + k
    return p, dp


def quartic_roots(coeffs) -> np.ndarray:
    """Four roots via companion-matrix eigenvalues, Newton-polished.

    Roots with negligible imaginary part are snapped onto the real axis;
    the result is sorted by (real, imag).
    """
    coeffs = [float(k) for k in coeffs]
    if len(coeffs) != 5 or coeffs[0] != 1.0:
        raise ValidationError("expected five coefficients of a monic quartic")
    companion = np.zeros((4, 4))
    companion[0, :] = -np.asarray(coeffs[1:])
    companion[1:, :-1] = np.eye(3)
    roots = np.linalg.eigvals(companion).astype(complex)
    res_tol = 1e-12 * max(1.0, max(abs(k) for k in coeffs))
    out = []
    for r in roots:
        p, dp = _horner(coeffs, r)
        for _ in range(60):
            if dp == 0 or abs(p) == 0:
                break
            with np.errstate(all="ignore"):
                nr = r - p / dp
                np_, ndp = _horner(coeffs, nr)
            if not (np.isfinite(nr) and np.isfinite(np_)) or abs(np_) >= abs(p):
                break
            r, p, dp = nr, np_, ndp
        if r.imag != 0.0:
            snapped = complex(r.real, 0.0)
            if abs(r.imag) <= IMAG_SNAP or (
                abs(r.imag) <= 1e-6 and abs(_horner(coeffs, snapped)[0]) <= res_tol
            ):
                r = snapped
        out.append(complex(r))
    out.sort(key=lambda z: (z.real, z.imag))
    return np.array(out)


# ---------------------------------------------------------------------------
# nonlinear eigenstates


def _h(s, delta):
    return ((1.0 + s) - (1.0 - delta) * (1.0 - s)) / (2.0 * np.sqrt(1.0 - s * s))


def _h_prime(s, delta):
    return ((2.0 - delta) + delta * s) / (2.0 * (1.0 - s * s) ** 1.5)


def _h_second(s, delta):
    q = 1.0 - s * s
    return (delta * q + 3.0 * s * ((2.0 - delta) + delta * s)) / (2.0 * q ** 2.5)


def stationarity(s, gamma: float, params: ModelParams, eta: int):
    """``g(s)``: zero exactly at the sin(theta)=0 fixed points with cos(theta)=eta."""
    return gamma + params.c * s + eta * params.v * _h(s, params.delta)


def stationarity_ds(s, params: ModelParams, eta: int):
    return params.c + eta * params.v * _h_prime(s, params.delta)


def stationarity_dss(s, params: ModelParams, eta: int):
    return eta * params.v * _h_second(s, params.delta)


def s_grid(n: int = GRID_POINTS) -> np.ndarray:
    """Uniform bracketing grid on ``(-1+1e-6, 1-1e-6)`` plus geometric nodes
    towards both edges (large-|gamma| states sit within 1e-6 of the edge)."""
    uniform = np.linspace(-1.0 + S_EDGE, 1.0 - S_EDGE, n)
    tail = 1.0 - np.logspace(-7, -13, 25)
    return np.unique(np.concatenate([-tail, uniform, tail]))


def _critical_points(params: ModelParams, eta: int, grid: np.ndarray) -> list[float]:
    gs = stationarity_ds(grid, params, eta)
    pts = []
    for i in np.nonzero(np.sign(gs[:-1]) != np.sign(gs[1:]))[0]:
        if gs[i] == 0.0:
            pts.append(float(grid[i]))
            continue
        pts.append(brentq(stationarity_ds, grid[i], grid[i + 1], args=(params, eta),
                          xtol=1e-15, rtol=8.9e-16))
    return pts


def _edge_sign(params: ModelParams, gamma: float, eta: int, upper: bool) -> float:
    """Sign of g in the limit s -> +-1."""
    if upper:
        return float(eta)
    d = params.delta
    if d == 1.0:
        return float(np.sign(gamma - params.c))
    return float(eta) if d > 1.0 else -float(eta)


def stationary_imbalances(gamma: float, params: ModelParams, eta: int,
                          n: int = GRID_POINTS) -> list[float]:
    """All roots of g(s; gamma, eta) in the open interval (-1, 1).

    The bracketing grid is augmented with the critical points of g, so g is
    monotone between consecutive nodes and every simple root is bracketed.
    """
    grid = s_grid(n)
    crit = _critical_points(params, eta, grid)
    nodes = np.unique(np.concatenate([grid, crit])) if crit else grid
    g = stationarity(nodes, gamma, params, eta)
    roots = []
    for i in range(len(nodes) - 1):
        if g[i] == 0.0:
            roots.append(float(nodes[i]))
        elif g[i] * g[i + 1] < 0.0:
            roots.append(brentq(stationarity, nodes[i], nodes[i + 1], args=(gamma, params, eta),
                                xtol=1e-15, rtol=8.9e-16))
    if g[-1] == 0.0:
        roots.append(float(nodes[-1]))
    scale = 1.0 + abs(gamma) + abs(params.c) + params.v
    for s_c in crit:
        val = stationarity(s_c, gamma, params, eta)
        if abs(val) <= 1e-12 * scale and all(abs(s_c - r) > 1e-9 for r in roots):
            roots.append(float(s_c))
    for upper, node, val in ((False, nodes[0], g[0]), (True, nodes[-1], g[-1])):
        lim = _edge_sign(params, gamma, eta, upper)
        if val != 0.0 and lim != 0.0 and np.sign(val) != lim:
            raise EigenstateSearchError(
                f"eigenstate search incomplete: root beyond s={node!r} (eta={eta})",
                grid=np.column_stack([nodes, g]),
            )
    return sorted(roots)


@dataclass(frozen=True)
class ValidatedState:
    """Real nonlinear eigenstate reconstructed from a fixed point."""

    s: float
    eta: int
    energy: float
    residual: float
    quartic_error: float
    a: float
    b: float

    @property
    def theta(self) -> float:
        return 0.0 if self.eta > 0 else math.pi

    def quantum_state(self) -> QuantumState:
        return QuantumState(self.a, self.b)


@dataclass(frozen=True)
class NonlinearLevelSet:
    gamma: float
    roots: np.ndarray
    validated: list[ValidatedState]
    spurious: np.ndarray
    loop_flag: bool
    delta_degenerate: bool = False
    rejected: list[ValidatedState] = field(default_factory=list)

    @property
    def energies(self) -> np.ndarray:
        return np.array([st.energy for st in self.validated])


def _eigen_residual(a: float, b: float, eps: complex, gamma: float, s: float,
                    params: ModelParams) -> float:
    h11 = 0.5 * gamma + 0.5 * params.c * s
    r1 = (h11 - eps) * a + 0.5 * params.v * b
    r2 = 0.5 * params.v * (1.0 - params.delta) * a - (h11 + eps) * b
    return max(abs(r1), abs(r2))


def _state_energy(a: float, b: float, gamma: float, s: float, params: ModelParams) -> float:
    h11 = 0.5 * gamma + 0.5 * params.c * s
    if abs(a) >= abs(b):
        return h11 + 0.5 * params.v * b / a
    return -h11 + 0.5 * params.v * (1.0 - params.delta) * a / b


def reconstruct_eigenstates(gamma: float, params: ModelParams,
                            n: int = GRID_POINTS) -> NonlinearLevelSet:
    """Real eigenstates at ``gamma``, each cross-checked against the quartic.

    Quartic roots without a reconstructed state are reported as ``spurious``
    (this includes complex-energy branches, which carry no eigenvector here).
    """
    roots = quartic_roots(quartic_coefficients(gamma, params))
    candidates = []
    for eta in (1, -1):
        for s in stationary_imbalances(gamma, params, eta, n):
            a = math.sqrt(0.5 * (1.0 - s))
            b = eta * math.sqrt(0.5 * (1.0 + s))
            candidates.append((s, eta, a, b))
    if params.delta == 1.0:
        # (1, 0) is an exact eigenstate when the lower hopping vanishes
        candidates.append((-1.0, 1, 1.0, 0.0))
    validated, rejected = [], []
    matched = np.zeros(len(roots), dtype=bool)
    for s, eta, a, b in candidates:
        eps = _state_energy(a, b, gamma, s, params)
        residual = _eigen_residual(a, b, eps, gamma, s, params)
        dist = np.abs(roots - eps)
        k = int(np.argmin(dist))
        st = ValidatedState(s, eta, eps, residual, float(dist[k]), a, b)
        if residual <= RESIDUAL_TOL and dist[k] <= QUARTIC_MATCH_TOL:
            validated.append(st)
            free = np.nonzero(~matched & (dist <= QUARTIC_MATCH_TOL))[0]
            matched[free[np.argmin(dist[free])] if len(free) else k] = True
        else:
            rejected.append(st)
    validated.sort(key=lambda st: (st.energy, st.s))
    return NonlinearLevelSet(
        gamma=gamma,
        roots=roots,
        validated=validated,
        spurious=roots[~matched],
        loop_flag=len(validated) == 4,
        delta_degenerate=params.delta == 2.0,
        rejected=rejected,
    )


# ---------------------------------------------------------------------------
# adiabatic states used to seed sweeps


@dataclass(frozen=True)
class AdiabaticState:
    energy: complex
    state: QuantumState


def _from_vector(vec) -> QuantumState:
    vec = np.asarray(vec, dtype=complex)
    vec = vec / np.linalg.norm(vec)
    return QuantumState(vec[0], vec[1])


def adiabatic_states(gamma: float, params: ModelParams) -> list[AdiabaticState]:
    """Instantaneous eigenstates sorted by (real, imag) energy."""
    if params.c == 0.0:
        spec = linear_spectrum(gamma, params)
        out = [
            AdiabaticState(spec.eps_plus, _from_vector(spec.vec_plus)),
            AdiabaticState(spec.eps_minus, _from_vector(spec.vec_minus)),
        ]
    else:
        levels = reconstruct_eigenstates(gamma, params)
        out = [AdiabaticState(complex(st.energy), st.quantum_state()) for st in levels.validated]
    out.sort(key=lambda x: (x.energy.real, x.energy.imag))
    return out


def mean_field_populations(state: QuantumState, gamma: float, params: ModelParams) -> tuple[float, float]:
    """Weights of ``state`` on the upper and lower eigenvectors of the
    mean-field Hamiltonian evaluated on ``state`` itself.

    Returns ``(p_upper, p_lower)`` summing to one.  At ``c == 0`` this is the
    projection onto the instantaneous adiabatic basis.
    """
    g_eff = gamma + params.c * state.imbalance()
    psi = state.normalized()
    if params.delta == 1.0:
        if g_eff == 0.0:
            raise ValidationError("adiabatic projection undefined at the delta=1 crossing")
        up = np.array([1.0, 0.0], dtype=complex)
        lo = np.array([-params.v / (2.0 * g_eff), 1.0], dtype=complex)
        if g_eff < 0:
            up, lo = lo, up
    else:
        ep, em, vp, vm, r = _mean_field_eigvecs(g_eff, params.v, params.delta)
        if r.imag != 0.0 or r.real == 0.0:
            raise ValidationError("adiabatic projection needs real, distinct levels")
        up, lo = vp, vm
    up = up / np.linalg.norm(up)
    lo = lo / np.linalg.norm(lo)
    coef = np.linalg.solve(np.column_stack([up, lo]), psi)
    w_up, w_lo = abs(coef[0]) ** 2, abs(coef[1]) ** 2
    total = w_up + w_lo
    return float(w_up / total), float(w_lo / total)


# ---------------------------------------------------------------------------
# loop window (nonlinear exceptional points)


@dataclass(frozen=True)
class Fold:
    """Double root of g: two real eigenstates merge here."""

    s: float
    gamma: float
    eta: int
    newton_iterations: int


@dataclass(frozen=True)
class LoopWindow:
    gamma_lo: float
    gamma_hi: float
    folds: tuple[Fold, ...]
    estimate_threshold: float

    def __iter__(self):
        return iter((self.gamma_lo, self.gamma_hi))

    def upper_fold(self) -> Fold:
        return max(self.folds, key=lambda f: f.gamma)


def _newton_fold(s0: float, params: ModelParams, eta: int, max_iter: int = 100):
    """Damped Newton on the system g(s, gamma) = 0, dg/ds(s) = 0."""
    s = s0
    gamma = -params.c * s - eta * params.v * _h(s, params.delta)
    for it in range(1, max_iter + 1):
        f1 = stationarity(s, gamma, params, eta)
        f2 = stationarity_ds(s, params, eta)
        j21 = stationarity_dss(s, params, eta)
        if j21 == 0.0:
            return None
        ds = -f2 / j21
        dg = -f1 - f2 * ds
        lam = 1.0
        norm0 = math.hypot(f1, f2)
        while True:
            s_new = s + lam * ds
            if abs(s_new) < 1.0:
                g_new = gamma + lam * dg
                norm1 = math.hypot(stationarity(s_new, g_new, params, eta),
                                   stationarity_ds(s_new, params, eta))
                if norm1 < norm0 or lam < 1e-6:
                    break
            lam *= 0.5
            if lam < 1e-12:
                return None
        s, gamma = s_new, g_new
        if abs(lam * ds) <= 1e-15 and abs(lam * dg) <= 1e-14 * (1 + abs(gamma)):
            return s, gamma, it
        if norm1 <= 1e-15 * (1 + abs(gamma) + abs(params.c)):
            return s, gamma, it
    return None


def loop_window(params: ModelParams, n: int = GRID_POINTS) -> LoopWindow | None:
    """Gamma interval bounded by the folds of the nonlinear level structure.

    Folds are seeded from a coarse scan of dg/ds over the s grid and polished
    with damped Newton on the double-root system.  Returns ``None`` when no
    two real eigenstates ever merge.
    """
    if params.c == 0.0:
        raise ValidationError("loop_window requires c != 0; use ep_locations")
    grid = np.linspace(-1.0 + S_EDGE, 1.0 - S_EDGE, n)
    folds = []
    for eta in (1, -1):
        gs = stationarity_ds(grid, params, eta)
        for i in np.nonzero(np.sign(gs[:-1]) != np.sign(gs[1:]))[0]:
            bracket = (float(grid[i]), float(grid[i + 1]))
            sol = _newton_fold(0.5 * sum(bracket), params, eta)
            if sol is None or not bracket[0] - 1e-3 <= sol[0] <= bracket[1] + 1e-3:
                raise LoopBoundaryError("loop boundary not found", bracket=bracket)
            s, g, it = sol
            if all(abs(s - f.s) > 1e-9 or f.eta != eta for f in folds):
                folds.append(Fold(float(s), float(g), eta, it))
    estimate = params.v * math.sqrt(max(1.0 - params.delta, 0.0))
    if len(folds) < 2:
        if not folds:
            return None
        # a single fold still bounds the region where the pair exists
        f = folds[0]
        return LoopWindow(f.gamma, f.gamma, tuple(folds), estimate)
    folds.sort(key=lambda f: f.gamma)
    return LoopWindow(folds[0].gamma, folds[-1].gamma, tuple(folds), estimate)


#: alias used in error hints
nonlinear_levels = reconstruct_eigenstates
