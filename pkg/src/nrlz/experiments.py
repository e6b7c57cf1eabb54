"""Batch drivers: probability curves, level and zeta traces, action
comparison and the (c, delta) adiabaticity phase diagram.

Every driver returns a result object with a ``table()`` method giving a
fixed header and rows; :func:`write_csv` turns that into a diff-stable file.
Grid points are independent and may be evaluated in worker processes; the
results are always gathered in input order, so the output does not depend
on the worker count.
"""

from __future__ import annotations

import csv
import io
import json
import math
import platform
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from importlib import metadata
from typing import Any, Callable, Iterable, Literal, Sequence

import numpy as np

from . import __version__
from .classical import homoclinic_action
from .dynamics import DEFAULT_TOL, SweepProtocol, integrate, tunneling_probabilities
from .exceptions import NRLZError, ValidationError
from .model import ModelParams, lz_closed_form
from .spectrum import (
    IMAG_SNAP,
    adiabatic_states,
    linear_spectrum,
    loop_window,
    quartic_coefficients,
    quartic_roots,
    reconstruct_eigenstates,
)

ADIABATIC_ALPHA = 0.01
MAX_ADIABATIC_ALPHA = 0.05
ADIABATIC_THRESHOLD = 0.01
ANALYTIC_TOLERANCE = 0.02
DEFAULT_GRID = np.linspace(0.0, 3.0, 41)


def _pmap(fn: Callable, tasks: Sequence, workers: int) -> list:
    """Ordered map, optionally over worker processes."""
    if workers is None or workers < 1:
        raise ValidationError("workers must be a positive integer")
    if workers == 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, tasks, chunksize=1))


# ---------------------------------------------------------------------------
# probability curves


@dataclass(frozen=True)
class SweepPoint:
    value: float
    p_lu: float
    p_ul: float
    p_lu_basis: float
    p_ul_basis: float
    zeta_final: float
    zeta_drift: float
    upper_available: bool
    lz_reference: float | None = None
    error: str | None = None


@dataclass(frozen=True)
class SweepGrid:
    axis: str
    values: tuple[float, ...]
    fixed: ModelParams
    results: tuple[SweepPoint, ...]

    HEADER = ("value", "p_lu", "p_ul", "p_lu_basis", "p_ul_basis", "zeta_final",
              "zeta_drift", "upper_available", "lz_reference", "error")

    def __post_init__(self):
        if len(self.values) != len(self.results):
            raise ValueError("results length must equal grid length")

    def table(self):
        rows = [[getattr(pt, name) for name in self.HEADER] for pt in self.results]
        return (self.axis,) + self.HEADER[1:], rows

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(pt, name) for pt in self.results], dtype=float)


def _sweep_point(task) -> SweepPoint:
    value, params, tol, lz = task
    ref = lz_closed_form(params.alpha, params.v) if lz else None
    try:
        r = tunneling_probabilities(params, tol=tol)
    except NRLZError as exc:
        nan = math.nan
        return SweepPoint(value, nan, nan, nan, nan, nan, nan, False, ref, str(exc))
    return SweepPoint(value, r.p_lu, r.p_ul, r.p_lu_basis, r.p_ul_basis,
                      r.zeta_normalized_final, r.zeta_drift, r.upper_available, ref)


def probability_curves(axis: Literal["alpha", "delta"], grid: Iterable[float],
                       fixed: ModelParams | None = None, workers: int = 1,
                       tol: float = DEFAULT_TOL) -> SweepGrid:
    """P_LU and P_UL along an alpha- or delta-grid.

    At ``c == 0, delta == 0`` each point also carries the Landau-Zener
    reference value.  Integrator failures are recorded per point.
    """
    if axis not in ("alpha", "delta"):
        raise ValidationError("axis must be 'alpha' or 'delta'")
    fixed = fixed or ModelParams()
    values = tuple(float(x) for x in grid)
    tasks = []
    for x in values:
        params = fixed.replace(**{axis: x, "gamma_start": fixed.gamma_start,
                                  "gamma_end": fixed.gamma_end})
        lz = params.c == 0.0 and params.delta == 0.0
        tasks.append((x, params, tol, lz))
    return SweepGrid(axis, values, fixed, tuple(_pmap(_sweep_point, tasks, workers)))


# ---------------------------------------------------------------------------
# level traces


def adiabatic_levels(gamma: float, params: ModelParams) -> np.ndarray:
    """All instantaneous levels at ``gamma``, four slots padded with NaN.

    ``c == 0``: the two linear eigenvalues.  Otherwise the real validated
    nonlinear levels followed by any complex-conjugate quartic branches.
    """
    out = np.full(4, complex(math.nan, math.nan))
    if params.c == 0.0:
        spec = linear_spectrum(gamma, params)
        out[0], out[1] = spec.lower()[0], spec.upper()[0]
        return out
    levels = [complex(st.energy) for st in reconstruct_eigenstates(gamma, params).validated]
    roots = quartic_roots(quartic_coefficients(gamma, params))
    levels += sorted((complex(r) for r in roots if abs(r.imag) > IMAG_SNAP),
                     key=lambda z: (z.real, z.imag))
    levels = levels[:4]
    out[: len(levels)] = levels
    return out


@dataclass(frozen=True)
class LevelTrace:
    gamma: np.ndarray
    eps_dyn: np.ndarray
    levels: np.ndarray  # (n, 4) complex, NaN-padded
    params: ModelParams
    start_level: str

    def deviation(self, slot: int) -> float:
        """Sup-norm distance between eps_dyn and level ``slot``."""
        return float(np.nanmax(np.abs(self.eps_dyn - self.levels[:, slot])))

    def table(self):
        header = ["gamma", "eps_dyn_re", "eps_dyn_im"]
        for k in range(self.levels.shape[1]):
            header += [f"level{k}_re", f"level{k}_im"]
        rows = []
        for i, g in enumerate(self.gamma):
            row = [float(g), self.eps_dyn[i].real, self.eps_dyn[i].imag]
            for z in self.levels[i]:
                row += [z.real, z.imag]
            rows.append(row)
        return tuple(header), rows


def level_trace(params: ModelParams, start_level: Literal["lower", "upper"] = "lower",
                sample_count: int = 2001, tol: float = DEFAULT_TOL) -> LevelTrace:
    """Dynamical energy of a sweep started on one adiabatic level, sampled
    alongside every adiabatic level at the same gamma values."""
    if params.alpha > MAX_ADIABATIC_ALPHA:
        raise ValidationError(f"level traces need alpha <= {MAX_ADIABATIC_ALPHA}")
    if start_level not in ("lower", "upper"):
        raise ValidationError("start_level must be 'lower' or 'upper'")
    protocol = SweepProtocol.from_params(params, sample_count)
    states = adiabatic_states(protocol.gamma_start, params)
    if not states:
        raise ValidationError("no eigenstate at gamma_start")
    if start_level == "upper" and len(states) < 2:
        raise ValidationError("upper start unavailable at gamma_start")
    start = states[0] if start_level == "lower" else states[-1]
    traj = integrate(start.state, protocol, params, tol)
    levels = np.array([adiabatic_levels(float(g), params) for g in traj.gamma])
    return LevelTrace(traj.gamma, traj.energy_dyn, levels, params, start_level)


# ---------------------------------------------------------------------------
# zeta traces


@dataclass(frozen=True)
class ZetaTrace:
    gamma: np.ndarray
    zeta_normalized: np.ndarray
    zeta_drift: float
    params: ModelParams

    @property
    def terminal(self) -> float:
        return float(self.zeta_normalized[-1])

    def table(self):
        return ("gamma", "zeta_normalized"), [
            [float(g), float(z)] for g, z in zip(self.gamma, self.zeta_normalized)
        ]


def zeta_trace(params: ModelParams, sample_count: int = 1001,
               tol: float = DEFAULT_TOL) -> ZetaTrace:
    """Normalized conserved integral along a lower-start sweep."""
    if params.delta == 1.0:
        raise ValidationError("zeta undefined at delta=1")
    protocol = SweepProtocol.from_params(params, sample_count)
    states = adiabatic_states(protocol.gamma_start, params)
    if not states:
        raise ValidationError("no eigenstate at gamma_start")
    traj = integrate(states[0].state, protocol, params, tol)
    return ZetaTrace(traj.gamma, traj.zeta_normalized, traj.zeta_drift(), params)


# ---------------------------------------------------------------------------
# action comparison


@dataclass(frozen=True)
class ActionRow:
    delta: float
    c: float
    p_lu_ad: float
    p_c_ad: float
    gamma_star: float
    has_loop: bool
    error: str | None = None

    @property
    def gap(self) -> float:
        return abs(self.p_lu_ad - self.p_c_ad)


@dataclass(frozen=True)
class ActionTable:
    rows: tuple[ActionRow, ...]

    HEADER = ("delta", "c", "p_lu_ad", "p_c_ad", "gap", "gamma_star", "has_loop", "error")

    def table(self):
        out = [[r.delta, r.c, r.p_lu_ad, r.p_c_ad, r.gap, r.gamma_star, r.has_loop, r.error]
               for r in self.rows]
        return self.HEADER, out


def _action_point(task) -> ActionRow:
    delta, c, v, tol = task
    params = ModelParams(v=v, c=c, delta=delta, alpha=ADIABATIC_ALPHA)
    try:
        window = loop_window(params) if c != 0.0 else None
        if window is None:
            return ActionRow(delta, c, 0.0, 0.0, math.nan, False)
        res = homoclinic_action(params)
        dyn = tunneling_probabilities(params, tol=tol)
    except NRLZError as exc:
        return ActionRow(delta, c, math.nan, math.nan, math.nan, True, str(exc))
    return ActionRow(delta, c, dyn.p_lu, res.p_c_ad, res.gamma_star, True)


def action_comparison(delta_values: Iterable[float], c_values: Iterable[float],
                      v: float = 1.0, workers: int = 1,
                      tol: float = DEFAULT_TOL) -> ActionTable:
    """p_LU from direct integration at alpha = 0.01 against I_c/2.

    Rows run over delta fastest.  Parameter points without a loop get (0, 0).
    """
    tasks = [(float(d), float(c), float(v), tol) for c in c_values for d in delta_values]
    return ActionTable(tuple(_pmap(_action_point, tasks, workers)))


# ---------------------------------------------------------------------------
# phase diagram


def analytic_boundary(c, v: float = 1.0):
    """Estimated onset of nonlinear breakdown, ``delta = 1 - (c/v)^2``."""
    return 1.0 - (np.asarray(c) / v) ** 2


def classify_cell(p_lu: float, p_ul: float, has_loop: bool, delta: float) -> str:
    if delta > 1.0:
        return "II"
    if delta < 1.0 and not has_loop and np.nanmax([p_lu, p_ul]) < ADIABATIC_THRESHOLD:
        return "I"
    return "III"


def _phase_cell(task):
    c, delta, alpha, v, tol = task
    params = ModelParams(v=v, c=c, delta=delta, alpha=alpha)
    try:
        has_loop = c != 0.0 and loop_window(params) is not None
        r = tunneling_probabilities(params, tol=tol)
    except NRLZError as exc:
        return math.nan, math.nan, False, "X", str(exc)
    return r.p_lu, r.p_ul, has_loop, classify_cell(r.p_lu, r.p_ul, has_loop, delta), None


@dataclass(frozen=True)
class PhaseDiagram:
    c_axis: np.ndarray
    delta_axis: np.ndarray
    p_lu: np.ndarray
    p_ul: np.ndarray
    has_loop: np.ndarray
    region_labels: np.ndarray
    errors: dict = field(default_factory=dict)
    alpha: float = ADIABATIC_ALPHA
    v: float = 1.0

    HEADER = ("c", "delta", "p_lu", "p_ul", "has_loop", "region", "boundary_delta", "error")

    def label(self, c: float, delta: float) -> str:
        i = int(np.argmin(np.abs(self.c_axis - c)))
        j = int(np.argmin(np.abs(self.delta_axis - delta)))
        return str(self.region_labels[i, j])

    def empirical_boundary(self) -> dict[float, float]:
        """Smallest c labelled III on every delta < 1 row (NaN if none)."""
        out = {}
        for j, d in enumerate(self.delta_axis):
            if d >= 1.0:
                continue
            hits = np.nonzero(self.region_labels[:, j] == "III")[0]
            out[float(d)] = float(self.c_axis[hits[0]]) if len(hits) else math.nan
        return out

    def table(self):
        rows = []
        for i, c in enumerate(self.c_axis):
            for j, d in enumerate(self.delta_axis):
                rows.append([float(c), float(d), float(self.p_lu[i, j]), float(self.p_ul[i, j]),
                             bool(self.has_loop[i, j]), str(self.region_labels[i, j]),
                             float(analytic_boundary(c, self.v)),
                             self.errors.get((i, j))])
        return self.HEADER, rows


def phase_diagram(c_grid: Iterable[float] = DEFAULT_GRID,
                  delta_grid: Iterable[float] = DEFAULT_GRID,
                  alpha: float = ADIABATIC_ALPHA, v: float = 1.0, workers: int = 1,
                  tol: float = DEFAULT_TOL) -> PhaseDiagram:
    """Region labels I (adiabatic), II (delta > 1) and III (breakdown).

    Failed cells are labelled ``X`` and keep NaN probabilities.
    """
    if not 0 < alpha <= MAX_ADIABATIC_ALPHA:
        raise ValidationError(f"phase diagram needs 0 < alpha <= {MAX_ADIABATIC_ALPHA}")
    c_axis = np.array([float(x) for x in c_grid])
    d_axis = np.array([float(x) for x in delta_grid])
    if np.any(d_axis < 0):
        raise ValidationError("delta must be non-negative")
    tasks = [(float(c), float(d), float(alpha), float(v), tol) for c in c_axis for d in d_axis]
    cells = _pmap(_phase_cell, tasks, workers)
    shape = (len(c_axis), len(d_axis))
    p_lu = np.full(shape, math.nan)
    p_ul = np.full(shape, math.nan)
    loops = np.zeros(shape, dtype=bool)
    labels = np.empty(shape, dtype=object)
    errors = {}
    for k, (plu, pul, lp, lab, err) in enumerate(cells):
        i, j = divmod(k, len(d_axis))
        p_lu[i, j], p_ul[i, j], loops[i, j], labels[i, j] = plu, pul, lp, lab
        if err is not None:
            errors[(i, j)] = err
    return PhaseDiagram(c_axis, d_axis, p_lu, p_ul, loops, labels, errors, float(alpha), float(v))


# ---------------------------------------------------------------------------
# serialization


def format_value(x: Any) -> str:
    """Shortest round-trip text for floats; blank for missing values."""
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return str(x)


def write_csv(target, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> None:
    """Write ``rows`` to a path or text stream."""
    own = isinstance(target, str)
    fh = open(target, "w", newline="") if own else target
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([format_value(x) for x in row])
    finally:
        if own:
            fh.close()


def csv_text(result) -> str:
    buf = io.StringIO()
    write_csv(buf, *result.table())
    return buf.getvalue()


def _version(dist: str) -> str:
    try:
        return metadata.version(dist)
    except metadata.PackageNotFoundError:
        return "unknown"


def run_manifest(command: str, config: dict, wall_time: float, **extra) -> dict:
    """JSON-serializable record sufficient to rerun ``command``."""
    return {
        "command": command,
        "config": config,
        "wall_time_s": wall_time,
        "versions": {
            "python": sys.version.split()[0],
            "platform": platform.platform(),
            "numpy": np.__version__,
            "scipy": _version("scipy"),
            "numba": _version("numba"),
            "nrlz": __version__,
        },
        **extra,
    }


def write_manifest(path: str, manifest: dict) -> None:
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True, default=_jsonable)
        fh.write("\n")


def _jsonable(x):
    if isinstance(x, np.generic):
        return x.item()
    if hasattr(x, "__dataclass_fields__"):
        return asdict(x)
    raise TypeError(f"not serializable: {type(x).__name__}")
