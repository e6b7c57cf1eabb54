"""Problem definition, Hamiltonian and pointwise observables.

The two-mode amplitudes evolve under a non-Hermitian Hamiltonian, so the
raw norm is not conserved.  A :class:`QuantumState` therefore carries a
``log_scale`` exponent: the physical amplitudes are ``(a, b) * exp(log_scale)``.
All population-dependent quantities inside the Hamiltonian use populations
normalized by the instantaneous total population.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .exceptions import ValidationError

#: raw-norm band outside of which a state is rescaled
RESCALE_LOW = 1e-6
RESCALE_HIGH = 1e6


def default_window(v: float, c: float) -> float:
    """Half-width of the default sweep window, ``50 * max(v, |c|, 1)``."""
    return 50.0 * max(v, abs(c), 1.0)


@dataclass(frozen=True)
class ModelParams:
    """Static problem definition.

    ``gamma_start``/``gamma_end`` default to ``-W``/``+W`` with
    ``W = default_window(v, c)``.
    """

    v: float = 1.0
    c: float = 0.0
    delta: float = 0.0
    alpha: float = 0.01
    gamma_start: float | None = None
    gamma_end: float | None = None

    def __post_init__(self):
        for name in ("v", "c", "delta", "alpha"):
            value = getattr(self, name)
            if not isinstance(value, (int, float)) or not math.isfinite(value):
                raise ValidationError(f"{name} must be a finite real number")
            object.__setattr__(self, name, float(value))
        if self.v <= 0:
            raise ValidationError("v must be positive")
        if self.alpha <= 0:
            raise ValidationError("alpha must be positive")
        if self.delta < 0:
            raise ValidationError("delta must be non-negative")
        w = default_window(self.v, self.c)
        if self.gamma_start is None:
            object.__setattr__(self, "gamma_start", -w)
        if self.gamma_end is None:
            object.__setattr__(self, "gamma_end", w)
        object.__setattr__(self, "gamma_start", float(self.gamma_start))
        object.__setattr__(self, "gamma_end", float(self.gamma_end))
        if not self.gamma_start < self.gamma_end:
            raise ValidationError("gamma_start must be smaller than gamma_end")

    @property
    def hermitian(self) -> bool:
        return self.delta == 0.0

    def replace(self, **changes) -> "ModelParams":
        """Copy with ``changes`` applied; window defaults are recomputed
        unless given explicitly."""
        values = {
            "v": self.v,
            "c": self.c,
            "delta": self.delta,
            "alpha": self.alpha,
            "gamma_start": None,
            "gamma_end": None,
        }
        values.update(changes)
        return ModelParams(**values)


@dataclass(frozen=True)
class QuantumState:
    """Raw amplitudes plus the accumulated rescaling exponent."""

    a: complex
    b: complex
    log_scale: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "a", complex(self.a))
        object.__setattr__(self, "b", complex(self.b))
        object.__setattr__(self, "log_scale", float(self.log_scale))
        if self.a == 0 and self.b == 0:
            raise ValidationError("state must be nonzero")

    @property
    def raw_norm2(self) -> float:
        return abs(self.a) ** 2 + abs(self.b) ** 2

    def normalized(self) -> np.ndarray:
        """Unit-norm amplitude vector ``(a, b)/sqrt(|a|^2 + |b|^2)``."""
        return np.array([self.a, self.b]) / math.sqrt(self.raw_norm2)

    def rescaled(self) -> "QuantumState":
        """Same physical state with raw norm 1."""
        n2 = self.raw_norm2
        r = math.sqrt(n2)
        return QuantumState(self.a / r, self.b / r, self.log_scale + 0.5 * math.log(n2))

    def populations(self) -> tuple[float, float]:
        n2 = self.raw_norm2
        return abs(self.a) ** 2 / n2, abs(self.b) ** 2 / n2

    def imbalance(self) -> float:
        """Normalized population imbalance ``s = |b|^2 - |a|^2``."""
        pa, pb = self.populations()
        return pb - pa

    def phases(self) -> tuple[float, float]:
        return float(np.angle(self.a)), float(np.angle(self.b))


@dataclass(frozen=True)
class ReducedState:
    """Point ``(s, theta)`` on the classical cylinder."""

    s: float
    theta: float

    def __post_init__(self):
        if not abs(self.s) <= 1.0:
            raise ValidationError("|s| must not exceed 1")

    @property
    def theta_mod(self) -> float:
        """Canonical representative of theta in ``[0, 2*pi)``."""
        return float(np.mod(self.theta, 2 * np.pi))

    @classmethod
    def from_quantum(cls, state: QuantumState) -> "ReducedState":
        ta, tb = state.phases()
        return cls(state.imbalance(), float(np.mod(tb - ta, 2 * np.pi)))


class Population(NamedTuple):
    """Total population ``N = mantissa * exp(2 * log_scale)``."""

    mantissa: float
    log_scale: float

    @property
    def log(self) -> float:
        return math.log(self.mantissa) + 2.0 * self.log_scale

    @property
    def value(self) -> float:
        """``N`` as a float; ``inf`` when it exceeds the double range."""
        try:
            return math.exp(self.log)
        except OverflowError:
            return math.inf

    def __float__(self) -> float:
        return self.value


@dataclass(frozen=True)
class Observables:
    population_total: Population
    zeta: float
    zeta_normalized: float
    energy_dyn: complex
    pop_a: float
    pop_b: float


def hamiltonian(gamma: float, state: QuantumState, params: ModelParams) -> np.ndarray:
    """Nonlinear, nonreciprocal 2x2 Hamiltonian evaluated on ``state``."""
    h11 = 0.5 * gamma + 0.5 * params.c * state.imbalance()
    return np.array(
        [
            [h11, 0.5 * params.v],
            [0.5 * params.v * (1.0 - params.delta), -h11],
        ],
        dtype=complex,
    )


def population_total(state: QuantumState) -> Population:
    return Population(state.raw_norm2, state.log_scale)


def _zeta_raw(a: complex, b: complex, delta: float) -> float:
    return abs(a) ** 2 - abs(b) ** 2 / (delta - 1.0)


def zeta(state: QuantumState, params: ModelParams) -> float:
    """Conserved integral ``n_a^2 - n_b^2/(delta - 1)`` of the physical state."""
    if params.delta == 1.0:
        raise ValidationError("zeta undefined at delta=1")
    ratio = _zeta_raw(state.a, state.b, params.delta) / state.raw_norm2
    n = population_total(state).value
    return ratio * n if ratio != 0.0 else 0.0


def zeta_normalized(state: QuantumState, params: ModelParams) -> float:
    if params.delta == 1.0:
        raise ValidationError("zeta undefined at delta=1")
    return _zeta_raw(state.a, state.b, params.delta) / state.raw_norm2


def dynamical_energy(state: QuantumState, gamma: float, params: ModelParams) -> complex:
    """Expectation value of H in the unit-normalized state (complex in general)."""
    psi = state.normalized()
    h = hamiltonian(gamma, state, params)
    return complex(np.vdot(psi, h @ psi))


def observables(state: QuantumState, gamma: float, params: ModelParams) -> Observables:
    pa, pb = state.populations()
    if params.delta == 1.0:
        z = zn = math.nan
    else:
        z, zn = zeta(state, params), zeta_normalized(state, params)
    return Observables(
        population_total=population_total(state),
        zeta=z,
        zeta_normalized=zn,
        energy_dyn=dynamical_energy(state, gamma, params),
        pop_a=pa,
        pop_b=pb,
    )


def lz_closed_form(alpha: float, v: float = 1.0) -> float:
    """Standard Landau-Zener probability ``exp(-pi v^2 / (2 alpha))``."""
    if not alpha > 0:
        raise ValidationError("alpha must be positive")
    return math.exp(-math.pi * v * v / (2.0 * alpha))
