"""Time evolution and tunneling probabilities.

The Schrodinger equation is integrated in Cartesian complex amplitudes with
an adaptive embedded Dormand-Prince pair (DOP853 by default, see :mod:`nrlz._integrator`).  Raw
amplitudes are rescaled into ``[1e-6, 1e6]`` whenever they leave that band;
the exponent is accumulated in ``log_scale`` so that the unnormalized
conserved integral stays available as a check on every trajectory.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator, Literal, NamedTuple

import numpy as np

from . import _integrator
from .exceptions import NumericalError, StiffnessError, ValidationError
from .model import (
    RESCALE_HIGH,
    RESCALE_LOW,
    ModelParams,
    Observables,
    QuantumState,
    observables,
)
from .spectrum import adiabatic_states, mean_field_populations

H_MIN = 1e-14
DEFAULT_TOL = 1e-11
WINDOW_FACTOR_MIN = 20.0


@dataclass(frozen=True)
class SweepProtocol:
    """How gamma moves during an integration.

    ``linear_sweep``: ``gamma = gamma_start + alpha * t`` up to ``gamma_end``.
    ``frozen``: ``gamma = gamma_start`` held for ``duration`` time units.
    """

    kind: Literal["linear_sweep", "frozen"] = "linear_sweep"
    gamma_start: float = -50.0
    gamma_end: float = 50.0
    alpha: float = 0.01
    sample_count: int = 2
    duration: float | None = None

    def __post_init__(self):
        if self.kind not in ("linear_sweep", "frozen"):
            raise ValidationError(f"unknown protocol kind {self.kind!r}")
        if int(self.sample_count) != self.sample_count or self.sample_count < 2:
            raise ValidationError("sample_count must be an integer >= 2")
        if self.kind == "linear_sweep":
            if not self.alpha > 0:
                raise ValidationError("alpha must be positive")
            if not self.gamma_start < self.gamma_end:
                raise ValidationError("gamma_start must be smaller than gamma_end")
            if not math.isfinite(self.total_time):
                raise ValidationError("sweep duration must be finite")
        else:
            if self.duration is None or not self.duration > 0:
                raise ValidationError("frozen protocol needs a positive duration")

    @classmethod
    def from_params(cls, params: ModelParams, sample_count: int = 2) -> "SweepProtocol":
        return cls("linear_sweep", params.gamma_start, params.gamma_end, params.alpha, sample_count)

    @property
    def total_time(self) -> float:
        if self.kind == "frozen":
            return float(self.duration)
        return (self.gamma_end - self.gamma_start) / self.alpha

    @property
    def rate(self) -> float:
        return self.alpha if self.kind == "linear_sweep" else 0.0

    def sample_times(self) -> np.ndarray:
        return np.linspace(0.0, self.total_time, int(self.sample_count))

    def gamma_at(self, t):
        return self.gamma_start + self.rate * np.asarray(t)


class Sample(NamedTuple):
    t: float
    gamma: float
    state: QuantumState
    observables: Observables


@dataclass(frozen=True)
class Trajectory:
    """Sampled solution; amplitudes are raw, physical = raw * exp(log_scale)."""

    t: np.ndarray
    gamma: np.ndarray
    a: np.ndarray
    b: np.ndarray
    log_scale: np.ndarray
    params: ModelParams
    protocol: SweepProtocol
    n_steps: int
    n_rejected: int

    def __len__(self) -> int:
        return len(self.t)

    def state(self, i: int) -> QuantumState:
        return QuantumState(self.a[i], self.b[i], self.log_scale[i])

    def __getitem__(self, i: int) -> Sample:
        st = self.state(i)
        g = float(self.gamma[i])
        return Sample(float(self.t[i]), g, st, observables(st, g, self.params))

    def __iter__(self) -> Iterator[Sample]:
        for i in range(len(self)):
            yield self[i]

    @property
    def final_state(self) -> QuantumState:
        return self.state(-1)

    # vectorized observables

    @property
    def raw_norm2(self) -> np.ndarray:
        return np.abs(self.a) ** 2 + np.abs(self.b) ** 2

    @property
    def pop_a(self) -> np.ndarray:
        return np.abs(self.a) ** 2 / self.raw_norm2

    @property
    def pop_b(self) -> np.ndarray:
        return np.abs(self.b) ** 2 / self.raw_norm2

    @property
    def log_population(self) -> np.ndarray:
        """``ln N`` at every sample."""
        return np.log(self.raw_norm2) + 2.0 * self.log_scale

    @property
    def zeta_normalized(self) -> np.ndarray:
        d = self.params.delta
        if d == 1.0:
            raise ValidationError("zeta undefined at delta=1")
        return (np.abs(self.a) ** 2 - np.abs(self.b) ** 2 / (d - 1.0)) / self.raw_norm2

    def zeta_drift(self) -> float:
        """``max_t |zeta(t) - zeta(0)| / max_t N(t)`` evaluated without overflow."""
        zn = self.zeta_normalized
        logn = self.log_population
        ref = float(np.max(logn))
        z = zn * np.exp(logn - ref)
        return float(np.max(np.abs(z - z[0])))

    @property
    def energy_dyn(self) -> np.ndarray:
        n2 = self.raw_norm2
        pa = np.abs(self.a) ** 2 / n2
        pb = np.abs(self.b) ** 2 / n2
        h11 = 0.5 * self.gamma + 0.5 * self.params.c * (pb - pa)
        v, d = self.params.v, self.params.delta
        cross = np.conj(self.a) * self.b * 0.5 * v + np.conj(self.b) * self.a * 0.5 * v * (1 - d)
        return h11 * (pa - pb) + cross / n2


def schrodinger_rhs(state: QuantumState, gamma: float, params: ModelParams) -> tuple[complex, complex]:
    """``d(a, b)/dt = -i H(gamma, state) (a, b)`` on the raw amplitudes."""
    da, db = _integrator.rhs(complex(state.a), complex(state.b), float(gamma),
                             params.v, params.c, params.delta)
    return complex(da), complex(db)


def integrate(initial: QuantumState, protocol: SweepProtocol, params: ModelParams,
              tol: float = DEFAULT_TOL, method: str = "dop853") -> Trajectory:
    """Adaptive integration sampled at uniformly spaced gamma (or t) values.

    ``method`` selects the embedded pair (``"dop853"`` or ``"dopri5"``).
    Raises :class:`StiffnessError` if the step size drops below 1e-14.
    """
    if not 1e-12 <= tol <= 1e-3:
        raise ValidationError("tol must lie in [1e-12, 1e-3]")
    try:
        tab = _integrator.TABLEAUS[method]
    except KeyError:
        raise ValidationError(f"unknown integration method {method!r}") from None
    start = initial.rescaled()
    ts = protocol.sample_times()
    out_a, out_b, out_log, status, t_fail, n_steps, n_rej = _integrator.integrate_kernel(
        complex(start.a), complex(start.b), float(start.log_scale),
        float(protocol.gamma_start), float(protocol.rate),
        params.v, params.c, params.delta,
        ts, float(tol), H_MIN, RESCALE_LOW, RESCALE_HIGH,
        tab.a, tab.b, tab.c, tab.e_high, tab.e_low, tab.exponent,
    )
    if status == _integrator.STATUS_STEP_UNDERFLOW:
        raise StiffnessError("stiffness failure: step size underflow",
                             float(protocol.gamma_at(t_fail)))
    if status != _integrator.STATUS_OK:
        raise NumericalError(f"non-finite state at gamma={float(protocol.gamma_at(t_fail))!r}")
    gammas = protocol.gamma_at(ts)
    if protocol.kind == "linear_sweep":
        gammas[-1] = protocol.gamma_end
    return Trajectory(ts, gammas, out_a, out_b, out_log, params, protocol, int(n_steps), int(n_rej))


@dataclass(frozen=True)
class TunnelingResult:
    """Tunneling probabilities read off at ``gamma_end``.

    ``p_lu``/``p_ul`` are weights on the instantaneous mean-field adiabatic
    eigenvectors; ``p_lu_basis``/``p_ul_basis`` are the raw basis populations
    ``|a|^2``/``|b|^2`` (identical as gamma -> infinity).  ``p_ul`` is NaN when
    no upper eigenstate exists at ``gamma_start``.
    """

    p_lu: float
    p_ul: float
    p_lu_basis: float
    p_ul_basis: float
    final_states: tuple[QuantumState, QuantumState | None]
    zeta_normalized_final: float
    zeta_drift: float
    upper_available: bool = True


def check_window(params: ModelParams, protocol: SweepProtocol) -> None:
    need = WINDOW_FACTOR_MIN * max(params.v, abs(params.c), 1.0)
    if abs(protocol.gamma_start) < need or abs(protocol.gamma_end) < need:
        raise ValidationError(f"sweep window must satisfy |gamma| >= {need:g} at both ends")


def _readout(traj: Trajectory) -> tuple[float, float, float, float]:
    st = traj.final_state
    g = float(traj.gamma[-1])
    p_up, p_lo = mean_field_populations(st, g, traj.params)
    pa, pb = st.populations()
    return p_up, p_lo, pa, pb


def tunneling_probabilities(params: ModelParams, protocol: SweepProtocol | None = None,
                            tol: float = DEFAULT_TOL) -> TunnelingResult:
    """Run the lower-start and upper-start sweeps and read off P_LU, P_UL."""
    if protocol is None:
        protocol = SweepProtocol.from_params(params)
    if protocol.kind != "linear_sweep":
        raise ValidationError("tunneling probabilities need a linear sweep")
    check_window(params, protocol)
    levels = adiabatic_states(protocol.gamma_start, params)
    if not levels:
        raise NumericalError("no eigenstate at gamma_start")
    lower = integrate(levels[0].state, protocol, params, tol)
    p_lu, _, p_lu_basis, _ = _readout(lower)
    if params.delta != 1.0:
        zn_final = float(lower.zeta_normalized[-1])
        drift = lower.zeta_drift()
    else:
        zn_final, drift = math.nan, math.nan
    if len(levels) >= 2:
        upper = integrate(levels[-1].state, protocol, params, tol)
        _, p_ul, _, p_ul_basis = _readout(upper)
        final_upper = upper.final_state
        if params.delta != 1.0:
            drift = max(drift, upper.zeta_drift())
        available = True
    else:
        p_ul = p_ul_basis = math.nan
        final_upper = None
        available = False
    return TunnelingResult(p_lu, p_ul, p_lu_basis, p_ul_basis,
                           (lower.final_state, final_upper), zn_final, drift, available)
