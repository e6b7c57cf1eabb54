"""Command-line front end.

    nrlz <subcommand> [--config FILE] [flags]

Settings are resolved as built-in defaults, then the config file, then
explicit flags.  A config file holds ``key = value`` lines (``#`` starts a
comment); keys are flag names with or without dashes.  A JSON run manifest
written by ``--manifest`` is accepted as a config file too, which makes
every run reproducible from its manifest alone.

Exit status: 0 success, 1 invalid input, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
from typing import Any, Callable

import numpy as np

from . import experiments as ex
from .classical import find_fixed_points, homoclinic_action, trace_frozen_orbit
from .dynamics import DEFAULT_TOL, tunneling_probabilities
from .exceptions import NRLZError, ValidationError
from .model import ModelParams, ReducedState


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.format_usage()}{self.prog}: error: {message}")


# name -> (type, default, help); None type means free text
COMMON = {
    "v": (float, 1.0, "coupling strength (energy unit)"),
    "c": (float, 0.0, "nonlinearity"),
    "delta": (float, 0.0, "nonreciprocity"),
    "alpha": (float, 0.01, "sweep rate"),
    "gamma_start": (float, None, "sweep start (default -50*max(v,|c|,1))"),
    "gamma_end": (float, None, "sweep end (default +50*max(v,|c|,1))"),
    "tol": (float, DEFAULT_TOL, "integrator tolerance"),
    "workers": (int, 1, "worker processes for grid commands"),
    "output": (str, None, "output file (default: stdout)"),
    "format": (str, None, "csv or json (default: json for single results, csv for tables)"),
    "manifest": (str, None, "write a JSON run manifest here"),
}

SPECIFIC = {
    "sweep": {},
    "curves": {
        "axis": (str, "alpha", "alpha or delta"),
        "values": (str, None, "grid: comma list or start:stop:count"),
    },
    "spectrum": {
        "gamma_min": (float, -3.0, "first gamma"),
        "gamma_max": (float, 3.0, "last gamma"),
        "points": (int, 201, "number of gamma values"),
    },
    "levels-trace": {
        "start": (str, "lower", "lower or upper"),
        "samples": (int, 2001, "sample count"),
    },
    "zeta": {"samples": (int, 1001, "sample count")},
    "portrait": {
        "gamma": (float, 0.0, "frozen gamma"),
        "orbits": (int, 8, "number of orbits (starts spread over s on theta = 0)"),
        "max_time": (float, 200.0, "time limit per orbit"),
    },
    "action": {
        "delta_values": (str, None, "delta grid for a comparison table"),
        "c_values": (str, None, "c grid for a comparison table"),
    },
    "phase-diagram": {
        "c_values": (str, "0:3:41", "c grid"),
        "delta_values": (str, "0:3:41", "delta grid"),
    },
}

def parse_grid(text: str) -> list[float]:
    """``"a,b,c"`` or ``"start:stop:count"`` (inclusive linspace)."""
    text = str(text).strip()
    try:
        if ":" in text:
            lo, hi, n = text.split(":")
            n = int(n)
            if n < 1:
                raise ValueError
            return [float(x) for x in np.linspace(float(lo), float(hi), n)]
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise ValidationError(f"bad grid specification {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="nrlz", description="Nonreciprocal nonlinear Landau-Zener toolkit")
    subs = parser.add_subparsers(dest="command", metavar="subcommand")
    subs.required = True
    for name, extra in SPECIFIC.items():
        sp = subs.add_parser(name, help=f"{name} run")
        sp.add_argument("--config", default=argparse.SUPPRESS, help="key = value settings file")
        for key, (typ, _, text) in {**COMMON, **extra}.items():
            sp.add_argument("--" + key.replace("_", "-"), dest=key, type=typ,
                            default=argparse.SUPPRESS, help=text)
    return parser


def read_config(path: str, allowed: dict) -> dict:
    with open(path) as fh:
        text = fh.read()
    if text.lstrip().startswith("{"):
        data = json.loads(text)
        items = data.get("config", data)
        items = {k: v for k, v in items.items() if k in allowed}
        return items
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValidationError(f"{path}:{lineno}: expected key = value")
        key, value = (part.strip() for part in line.split("=", 1))
        key = key.lstrip("-").replace("-", "_")
        if key not in allowed:
            raise ValidationError(f"{path}:{lineno}: unknown key {key!r}")
        typ = allowed[key][0]
        try:
            out[key] = None if value.lower() in ("", "none") else typ(value)
        except ValueError:
            raise ValidationError(f"{path}:{lineno}: bad value for {key}") from None
    return out


def resolve(command: str, explicit: dict) -> dict:
    allowed = {**COMMON, **SPECIFIC[command]}
    cfg = {key: spec[1] for key, spec in allowed.items()}
    if "config" in explicit:
        cfg.update(read_config(explicit.pop("config"), allowed))
    cfg.update(explicit)
    if cfg["format"] not in (None, "csv", "json"):
        raise ValidationError("format must be csv or json")
    return cfg


def _params(cfg: dict) -> ModelParams:
    return ModelParams(v=cfg["v"], c=cfg["c"], delta=cfg["delta"], alpha=cfg["alpha"],
                       gamma_start=cfg["gamma_start"], gamma_end=cfg["gamma_end"])


# ---------------------------------------------------------------------------
# subcommands; each returns either a dict (JSON) or an object with table()


class Table:
    def __init__(self, header, rows):
        self.header, self.rows = tuple(header), rows

    def table(self):
        return self.header, self.rows


def cmd_sweep(cfg):
    p = _params(cfg)
    r = tunneling_probabilities(p, tol=cfg["tol"])
    return {
        "p_lu": r.p_lu, "p_ul": r.p_ul,
        "p_lu_basis": r.p_lu_basis, "p_ul_basis": r.p_ul_basis,
        "zeta_normalized_final": r.zeta_normalized_final,
        "zeta_drift": r.zeta_drift, "upper_available": r.upper_available,
    }


def cmd_curves(cfg):
    if cfg["values"] is None:
        raise ValidationError("curves needs --values")
    grid = parse_grid(cfg["values"])
    for x in grid:
        if cfg["axis"] == "alpha" and not x > 0:
            raise ValidationError("alpha must be positive")
        if cfg["axis"] == "delta" and x < 0:
            raise ValidationError("delta must be non-negative")
    return ex.probability_curves(cfg["axis"], grid, _params(cfg), cfg["workers"], cfg["tol"])


def cmd_spectrum(cfg):
    p = _params(cfg)
    if cfg["points"] < 1:
        raise ValidationError("points must be positive")
    gammas = np.linspace(cfg["gamma_min"], cfg["gamma_max"], cfg["points"])
    header = ["gamma"]
    for k in range(4):
        header += [f"level{k}_re", f"level{k}_im"]
    rows = []
    for g in gammas:
        row = [float(g)]
        for z in ex.adiabatic_levels(float(g), p):
            row += [z.real, z.imag]
        rows.append(row)
    return Table(header, rows)


def cmd_levels_trace(cfg):
    return ex.level_trace(_params(cfg), cfg["start"], cfg["samples"], cfg["tol"])


def cmd_zeta(cfg):
    return ex.zeta_trace(_params(cfg), cfg["samples"], cfg["tol"])


def cmd_portrait(cfg):
    p = _params(cfg)
    g = cfg["gamma"]
    rows = []
    for k, fp in enumerate(find_fixed_points(g, p)):
        rows.append(["fixed", k, 0.0, fp.s, fp.theta, fp.stability])
    n = cfg["orbits"]
    if n < 0:
        raise ValidationError("orbits must be non-negative")
    for k, s0 in enumerate(np.linspace(-0.9, 0.9, n) if n else []):
        orbit = trace_frozen_orbit(ReducedState(float(s0), 0.0), g, p, cfg["max_time"])
        for t, (s, th) in zip(orbit.times, orbit.points):
            rows.append(["orbit", k, float(t), float(s), float(th % (2 * math.pi)),
                         orbit.termination])
    return Table(("record", "index", "t", "s", "theta", "label"), rows)


def cmd_action(cfg):
    if cfg["delta_values"] is not None or cfg["c_values"] is not None:
        deltas = parse_grid(cfg["delta_values"] if cfg["delta_values"] is not None
                            else repr(cfg["delta"]))
        cs = parse_grid(cfg["c_values"] if cfg["c_values"] is not None else repr(cfg["c"]))
        return ex.action_comparison(deltas, cs, cfg["v"], cfg["workers"], cfg["tol"])
    res = homoclinic_action(_params(cfg))
    return {
        "gamma_star": res.gamma_star, "I_c": res.I_c, "p_c_ad": res.p_c_ad,
        "s_star": res.s_star, "theta_star": res.theta_star,
        "closure_error": res.closure_error, "termination": res.orbit.termination,
    }


def cmd_phase_diagram(cfg):
    return ex.phase_diagram(parse_grid(cfg["c_values"]), parse_grid(cfg["delta_values"]),
                            cfg["alpha"], cfg["v"], cfg["workers"], cfg["tol"])


COMMANDS: dict[str, Callable[[dict], Any]] = {
    "sweep": cmd_sweep,
    "curves": cmd_curves,
    "spectrum": cmd_spectrum,
    "levels-trace": cmd_levels_trace,
    "zeta": cmd_zeta,
    "portrait": cmd_portrait,
    "action": cmd_action,
    "phase-diagram": cmd_phase_diagram,
}


def _json_value(x):
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else None
    if isinstance(x, np.bool_):
        return bool(x)
    if isinstance(x, np.integer):
        return int(x)
    return x


def render(result, fmt: str | None) -> str:
    if fmt is None:
        fmt = "json" if isinstance(result, dict) else "csv"
    if isinstance(result, dict):
        if fmt == "csv":
            keys = list(result)
            return ex.csv_text(Table(keys, [[result[k] for k in keys]]))
        return json.dumps({k: _json_value(v) for k, v in result.items()}, indent=2) + "\n"
    if fmt == "csv":
        return ex.csv_text(result)
    header, rows = result.table()
    return json.dumps({"header": list(header),
                       "rows": [[_json_value(x) for x in r] for r in rows]}) + "\n"


def parse_and_dispatch(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    try:
        ns = vars(parser.parse_args(argv))
        command = ns.pop("command")
        cfg = resolve(command, ns)
        started = time.perf_counter()
        result = COMMANDS[command](cfg)
        text = render(result, cfg["format"])
        wall = time.perf_counter() - started
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    except (ValidationError, OSError, json.JSONDecodeError) as exc:
        print(f"nrlz: error: {exc}", file=sys.stderr)
        return 1
    except NRLZError as exc:
        print(f"nrlz: numerical failure: {exc}", file=sys.stderr)
        return 2
    if cfg["output"]:
        with open(cfg["output"], "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    if cfg["manifest"]:
        record = {k: v for k, v in cfg.items() if k not in ("manifest",)}
        ex.write_manifest(cfg["manifest"], ex.run_manifest(command, record, wall))
    return 0


def main() -> None:
    sys.exit(parse_and_dispatch())


if __name__ == "__main__":
    main()
