"""Nonreciprocal, nonlinear Landau-Zener two-level model.

Submodules: :mod:`~nrlz.model` (parameters, Hamiltonian, observables),
:mod:`~nrlz.dynamics` (sweeps and tunneling probabilities),
:mod:`~nrlz.spectrum` (linear and nonlinear adiabatic levels),
:mod:`~nrlz.classical` (reduced phase-space dynamics and actions),
:mod:`~nrlz.experiments` (batch drivers) and :mod:`~nrlz.cli`.
"""

__version__ = "0.1.0"

from .exceptions import (  # noqa: E402
    EigenstateSearchError,
    HomoclinicTraceError,
    LoopBoundaryError,
    NRLZError,
    NumericalError,
    PhaseSpaceBoundaryError,
    StiffnessError,
    ValidationError,
)
from .model import (  # noqa: E402
    ModelParams,
    QuantumState,
    ReducedState,
    dynamical_energy,
    hamiltonian,
    lz_closed_form,
    observables,
    population_total,
    zeta,
)
from .dynamics import SweepProtocol, Trajectory, integrate, tunneling_probabilities  # noqa: E402
from .spectrum import (  # noqa: E402
    ep_locations,
    linear_spectrum,
    loop_window,
    quartic_coefficients,
    quartic_roots,
    reconstruct_eigenstates,
)
from .classical import (  # noqa: E402
    divergence_check,
    find_fixed_points,
    homoclinic_action,
    reduced_rhs,
    trace_frozen_orbit,
)

__all__ = [
    "EigenstateSearchError", "HomoclinicTraceError", "LoopBoundaryError", "NRLZError",
    "NumericalError", "PhaseSpaceBoundaryError", "StiffnessError", "ValidationError",
    "ModelParams", "QuantumState", "ReducedState", "dynamical_energy", "hamiltonian",
    "lz_closed_form", "observables", "population_total", "zeta",
    "SweepProtocol", "Trajectory", "integrate", "tunneling_probabilities",
    "ep_locations", "linear_spectrum", "loop_window", "quartic_coefficients",
    "quartic_roots", "reconstruct_eigenstates",
    "divergence_check", "find_fixed_points", "homoclinic_action", "reduced_rhs",
    "trace_frozen_orbit",
]
