"""Command-line front end: ``inls run <config.json> [--out DIR] [--jobs N]``.

A run reads one JSON config, writes ``<out>/<config-hash>/`` containing
``summary.json``, ``series.csv`` (evolution runs) and ``fields/*.csv``,
and exits 0 on success, 2 on invalid input, 3 when a solver does not
converge and 4 on an internal consistency failure. Errors are mirrored as
a JSON object ``{"error", "detail"}`` on standard error.

See ``docs/config.md`` for the full schema and defaults.
"""

from __future__ import annotations

import argparse
import csv
import itertools
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .diagnostics import (CutoffProfile, classify, coercivity_fit,
                          diagnostic_observers, scattering_proxy)
from .errors import InlsError, ValidationError
from .evolution import EvolveConfig, Sponge, config_hash, evolve
from .functionals import critical_index, snapshot, thresholds
from .grid import RadialField, make_grid, read_field_csv, write_field_csv
from .ground_state import solve_free_q, solve_q_with_potential, write_ground_state
from .potentials import (DIVERGENT, THEOREMS, Potential, eval_potential,
                         hypothesis_check, kato_norm)

COMMANDS = ("groundstate", "thresholds", "kato", "check", "evolve", "classify", "sweep")
INITIAL_KINDS = ("gaussian", "scaled_ground", "file")
SWEEP_KEYS = ("amp", "lambda", "b", "c")
DEFAULT_GRID = {"r_max": 32.0, "n": 8192}


@dataclass(frozen=True)
class RunConfig:
    """Validated run configuration."""

    command: str
    b: float
    potential: Potential
    grid: dict
    initial: dict | None = None
    evolve: EvolveConfig | None = None
    sweep: dict | None = None
    diagnostics: dict = field(default_factory=dict)
    base_dir: str = "."

    def canonical(self) -> dict:
        """JSON-ready form used for hashing (paths excluded)."""
        return {
            "command": self.command, "b": self.b, "potential": self.potential.to_spec(),
            "grid": self.grid, "initial": self.initial,
            "evolve": None if self.evolve is None else self.evolve.to_dict(),
            "sweep": self.sweep, "diagnostics": self.diagnostics,
        }


def _number(d, key, default=None, *, cast=float):
    if key not in d:
        if default is None:
            raise ValidationError(f"missing required field {key!r}")
        return default
    try:
        val = cast(d[key])
    except (TypeError, ValueError):
        raise ValidationError(f"field {key!r} must be a number, got {d[key]!r}") from None
    if isinstance(val, float) and not math.isfinite(val):
        raise ValidationError(f"field {key!r} must be finite")
    return val


def _check_b(b):
    if not 0 < b < 1:
        raise ValidationError(f"b must satisfy 0 < b < 1, got {b}")


def _parse_initial(d, base: Path):
    if d is None:
        return None
    if not isinstance(d, dict) or d.get("kind") not in INITIAL_KINDS:
        raise ValidationError(f"initial.kind must be one of {INITIAL_KINDS}")
    kind = d["kind"]
    if kind == "gaussian":
        return {"kind": kind, "amp": _number(d, "amp"), "width": _number(d, "width", 1.0)}
    if kind == "scaled_ground":
        return {"kind": kind, "lambda": _number(d, "lambda")}
    path = d.get("path")
    if not isinstance(path, str):
        raise ValidationError("initial.path must be a string")
    full = (base / path) if not Path(path).is_absolute() else Path(path)
    if not full.is_file():
        raise ValidationError(f"initial file {path!r} does not exist")
    return {"kind": kind, "path": str(full)}


def _parse_evolve(d):
    if d is None:
        return None
    if not isinstance(d, dict):
        raise ValidationError("evolve must be an object")
    known = {"t_end", "dt", "record_every", "sponge", "blowup_factor", "drift_tol",
             "resolution_tol", "scheme", "monotone_window", "max_subdivision"}
    extra = set(d) - known
    if extra:
        raise ValidationError(f"unknown evolve fields {sorted(extra)}")
    kw = dict(d)
    sp = kw.pop("sponge", None)
    if sp is not None:
        if not isinstance(sp, dict):
            raise ValidationError("evolve.sponge must be an object or null")
        kw["sponge"] = Sponge(_number(sp, "width"), _number(sp, "strength"))
    if "t_end" not in kw:
        raise ValidationError("missing required field 't_end' in evolve")
    try:
        return EvolveConfig(**kw)
    except TypeError as exc:
        raise ValidationError(str(exc)) from None


def _parse_sweep(d):
    if d is None:
        return None
    if not isinstance(d, dict):
        raise ValidationError("sweep must be an object")
    grid = d.get("grid", {})
    if not isinstance(grid, dict) or not grid:
        raise ValidationError("sweep.grid must be a non-empty object")
    out = {}
    for k, vals in grid.items():
        if k not in SWEEP_KEYS:
            raise ValidationError(f"sweep parameter {k!r} not in {SWEEP_KEYS}")
        if not isinstance(vals, list) or not vals:
            raise ValidationError(f"sweep grid for {k!r} must be a non-empty list")
        out[k] = [_number({"v": v}, "v") for v in vals]
        if k == "b":
            for b in out[k]:
                _check_b(b)
    potentials = d.get("potentials")
    if potentials is not None:
        if not isinstance(potentials, list) or not potentials:
            raise ValidationError("sweep.potentials must be a non-empty list")
        potentials = [Potential.from_spec(p).to_spec() for p in potentials]
    cell = d.get("cell_command", "classify")
    if cell not in ("classify", "evolve"):
        raise ValidationError("sweep.cell_command must be 'classify' or 'evolve'")
    return {"grid": out, "potentials": potentials, "cell_command": cell}


def parse_config(data: dict, base_dir=".") -> RunConfig:
    """Validate a decoded JSON config.

    Raises
    ------
    ValidationError
        On any violated bound, unknown field or missing file.
    """
    if not isinstance(data, dict):
        raise ValidationError("config must be a JSON object")
    known = {"command", "b", "potential", "grid", "initial", "evolve", "sweep", "diagnostics"}
    extra = set(data) - known
    if extra:
        raise ValidationError(f"unknown config fields {sorted(extra)}")
    command = data.get("command")
    if command not in COMMANDS:
        raise ValidationError(f"command must be one of {COMMANDS}, got {command!r}")
    b = _number(data, "b")
    _check_b(b)
    potential = Potential.from_spec(data.get("potential", {"kind": "zero"}))
    g = data.get("grid", DEFAULT_GRID)
    if not isinstance(g, dict):
        raise ValidationError("grid must be an object")
    grid = {"r_max": _number(g, "r_max", DEFAULT_GRID["r_max"]),
            "n": _number(g, "n", DEFAULT_GRID["n"], cast=int)}
    make_grid(grid["r_max"], grid["n"])
    base = Path(base_dir)
    initial = _parse_initial(data.get("initial"), base)
    evo = _parse_evolve(data.get("evolve"))
    sweep = _parse_sweep(data.get("sweep"))
    diag = data.get("diagnostics", {}) or {}
    if not isinstance(diag, dict) or set(diag) - {"cutoff_R", "exterior_R"}:
        raise ValidationError("diagnostics accepts only cutoff_R and exterior_R")
    diag = {k: _number(diag, k) for k in diag}
    if command in ("evolve", "classify") and initial is None:
        raise ValidationError(f"command {command!r} needs an 'initial' section")
    if command == "evolve" and evo is None:
        raise ValidationError("command 'evolve' needs an 'evolve' section")
    if command == "sweep":
        if sweep is None:
            raise ValidationError("command 'sweep' needs a 'sweep' section")
        if initial is None:
            raise ValidationError("command 'sweep' needs an 'initial' section")
        if sweep["cell_command"] == "evolve" and evo is None:
            raise ValidationError("evolving sweep cells need an 'evolve' section")
    return RunConfig(command, b, potential, grid, initial, evo, sweep, diag, str(base))


def load_config(path) -> RunConfig:
    path = Path(path)
    if not path.is_file():
        raise ValidationError(f"config file {str(path)!r} does not exist")
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ValidationError(f"config is not valid JSON: {exc}") from None
    return parse_config(data, path.parent)


# ---------------------------------------------------------------- execution

def _json_num(x):
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isfinite(x):
            return x
        return "-inf" if x < 0 else ("inf" if x > 0 else "nan")
    if isinstance(x, dict):
        return {k: _json_num(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_json_num(v) for v in x]
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    if x is DIVERGENT:
        return "Divergent"
    return x


class _Context:
    """Ground states shared between the steps of one run."""

    def __init__(self, cfg: RunConfig):
        self.cfg = cfg
        self.grid = make_grid(cfg.grid["r_max"], cfg.grid["n"])
        self._grounds = {}

    def free(self):
        if "free" not in self._grounds:
            self._grounds["free"] = solve_free_q(self.cfg.b, self.grid)
        return self._grounds["free"]

    def grounds(self) -> dict:
        out = {"free": self.free()}
        V = self.cfg.potential
        v = eval_potential(V, self.grid.nodes)
        if V.has_negative_part and np.all(v <= 0):
            if "with_potential" not in self._grounds:
                self._grounds["with_potential"] = solve_q_with_potential(V, self.cfg.b, self.grid)
            out["with_potential"] = self._grounds["with_potential"]
        return out

    def initial_field(self) -> RadialField:
        ini = self.cfg.initial
        if ini["kind"] == "gaussian":
            amp, width = ini["amp"], ini["width"]
            return RadialField.from_function(self.grid, lambda r: amp * np.exp(-(r / width) ** 2))
        if ini["kind"] == "scaled_ground":
            return self.free().profile.scaled(ini["lambda"])
        return read_field_csv(ini["path"], self.grid)


def _branch_name(V: Potential, grid) -> str | None:
    v = eval_potential(V, grid.nodes)
    if np.all(v >= 0):
        return "free"
    if np.all(v <= 0):
        return "well"
    return None


def _cmd_groundstate(ctx, out: Path, summary: dict):
    fields = out / "fields"
    for name, g in ctx.grounds().items():
        write_ground_state(fields / f"ground_{name}", g)
        summary.setdefault("ground_states", {})[name] = g.to_json()


def _cmd_thresholds(ctx, out: Path, summary: dict):
    branch = _branch_name(ctx.cfg.potential, ctx.grid)
    if branch is None:
        raise ValidationError("V changes sign; no threshold branch applies")
    grounds = ctx.grounds()
    key = "free" if branch == "free" else "with_potential"
    if key not in grounds:
        raise ValidationError("V <= 0 needs a nonzero negative part for the potential branch")
    th = thresholds(ctx.cfg.b, branch, grounds[key])
    summary["thresholds"] = th.to_dict()
    summary["ground_state"] = grounds[key].to_json()


def _cmd_kato(ctx, out: Path, summary: dict):
    V = ctx.cfg.potential
    summary["kato"] = {"abs": kato_norm(V, "abs"), "negative": kato_norm(V, "negative"),
                       "bound": 4.0 * math.pi}


def _cmd_check(ctx, out: Path, summary: dict):
    summary["hypothesis"] = {tid: hypothesis_check(ctx.cfg.potential, tid, ctx.grid).to_dict()
                             for tid in THEOREMS}


def _trapping(traj, th, b) -> dict:
    """Record-wise checks of the below-threshold trapping and coercivity bounds."""
    kin = traj.series("kin_product")
    e = traj.series("energy")
    h = traj.series("kinetic_h")
    k = traj.series("kfun")
    sc = critical_index(b)
    return {
        "kin_below_threshold": bool(np.all(kin < th.script_k)),
        "kin_above_threshold": bool(np.all(kin > th.script_k)),
        "energy_band": bool(np.all((2 * e <= h) & (h < (3 + b) / sc * e))),
        "k_positive": bool(np.all(k > 0)),
        "k_negative": bool(np.all(k < 0)),
    }


def _evolve_and_write(ctx, u0, out: Path, summary: dict, report):
    cfg = ctx.cfg
    observers = {}
    diag = cfg.diagnostics
    if diag:
        R = diag.get("cutoff_R", ctx.grid.r_max / 2)
        observers = diagnostic_observers(cfg.potential, cfg.b, CutoffProfile.quadratic_capped(R),
                                         diag.get("exterior_R"))
    traj = evolve(u0, cfg.potential, cfg.b, cfg.evolve, observers=observers)
    traj.write_series_csv(out / "series.csv")
    write_field_csv(out / "fields" / "final.csv", traj.final_field)
    summary["outcome"] = traj.outcome
    summary["t_star"] = traj.t_star
    summary["trigger"] = traj.trigger
    summary["evolution"] = {k: v for k, v in traj.metadata.items()}
    summary["mass_drift"] = traj.relative_drift("mass")
    summary["energy_drift"] = traj.relative_drift("energy")
    summary["coercivity"] = coercivity_fit(traj).to_dict()
    if report.thresholds is not None:
        summary["trapping"] = _trapping(traj, report.thresholds, cfg.b)
    if traj.outcome == "completed":
        summary["scattering_proxy"] = scattering_proxy(traj).to_dict()
    return traj


def _cmd_evolve(ctx, out: Path, summary: dict):
    u0 = ctx.initial_field()
    write_field_csv(out / "fields" / "initial.csv", u0)
    summary["initial"] = asdict(snapshot(ctx.grid, u0, ctx.cfg.potential, ctx.cfg.b))
    grounds = ctx.grounds()
    summary["ground_states"] = {k: g.to_json() for k, g in grounds.items()}
    report = classify(u0, ctx.cfg.potential, ctx.cfg.b, grounds, hypothesis_grid=ctx.grid)
    traj = _evolve_and_write(ctx, u0, out, summary, report)
    summary["classification"] = report.with_outcome(traj.outcome).to_dict()


def _cmd_classify(ctx, out: Path, summary: dict):
    if ctx.cfg.evolve is not None:
        _cmd_evolve(ctx, out, summary)
        return
    u0 = ctx.initial_field()
    write_field_csv(out / "fields" / "initial.csv", u0)
    grounds = ctx.grounds()
    summary["ground_states"] = {k: g.to_json() for k, g in grounds.items()}
    report = classify(u0, ctx.cfg.potential, ctx.cfg.b, grounds, hypothesis_grid=ctx.grid)
    summary["classification"] = report.to_dict()


_HANDLERS = {"groundstate": _cmd_groundstate, "thresholds": _cmd_thresholds,
             "kato": _cmd_kato, "check": _cmd_check, "evolve": _cmd_evolve,
             "classify": _cmd_classify}


def execute(cfg: RunConfig, out_root) -> Path:
    """Run a single (non-sweep) config and return its output directory."""
    if cfg.command == "sweep":
        return run_sweep(cfg, out_root)
    out = Path(out_root) / config_hash(cfg.canonical())
    (out / "fields").mkdir(parents=True, exist_ok=True)
    ctx = _Context(cfg)
    summary = {"config": cfg.canonical(), "config_hash": out.name}
    _HANDLERS[cfg.command](ctx, out, summary)
    (out / "summary.json").write_text(json.dumps(_json_num(summary), indent=2, sort_keys=True))
    return out


# --------------------------------------------------------------------- sweep

def sweep_cells(cfg: RunConfig) -> list[dict]:
    """Parameter combinations in deterministic order (potentials outermost)."""
    sw = cfg.sweep
    keys = [k for k in SWEEP_KEYS if k in sw["grid"]]
    pots = sw["potentials"] or [cfg.potential.to_spec()]
    cells = []
    for pot in pots:
        for combo in itertools.product(*(sw["grid"][k] for k in keys)):
            cells.append({"potential": pot, **dict(zip(keys, combo))})
    return cells


def _cell_config(cfg: RunConfig, cell: dict) -> RunConfig:
    pot = dict(cell["potential"])
    if "c" in cell:
        pot["c"] = cell["c"]
    initial = dict(cfg.initial)
    if "lambda" in cell:
        if initial["kind"] != "scaled_ground":
            raise ValidationError("sweeping lambda needs initial.kind = scaled_ground")
        initial["lambda"] = cell["lambda"]
    if "amp" in cell:
        if initial["kind"] != "gaussian":
            raise ValidationError("sweeping amp needs initial.kind = gaussian")
        initial["amp"] = cell["amp"]
    command = cfg.sweep["cell_command"]
    return RunConfig(command, cell.get("b", cfg.b), Potential.from_spec(pot), cfg.grid,
                     initial, cfg.evolve if command == "evolve" else None, None,
                     cfg.diagnostics, cfg.base_dir)


RESULT_COLUMNS = ("index", "potential", "c", "b", "lambda", "amp", "me", "kin", "prediction",
                  "outcome", "consistent", "status", "error")


def _run_cell(args):
    index, cfg, cell, cells_root = args
    row = {"index": index, "potential": cell["potential"]["kind"],
           "c": cell.get("c", cell["potential"].get("c", 0.0)), "b": cell.get("b", cfg.b),
           "lambda": cell.get("lambda", ""), "amp": cell.get("amp", ""),
           "me": "", "kin": "", "prediction": "", "outcome": "", "consistent": "",
           "status": "ok", "error": ""}
    try:
        ccfg = _cell_config(cfg, cell)
        out = execute(ccfg, cells_root)
        summary = json.loads((out / "summary.json").read_text())
        rep = summary["classification"]
        row.update(me=rep["me"], kin=rep["kin"], prediction=rep["prediction"],
                   outcome=summary.get("outcome", ""),
                   consistent="" if rep["consistent"] is None else rep["consistent"])
    except InlsError as exc:
        row.update(status=f"exit {exc.exit_code}", error=f"{type(exc).__name__}: {exc}")
    except Exception as exc:  # a failing cell never aborts the sweep
        row.update(status="exit 4", error=f"{type(exc).__name__}: {exc}")
    return row


def run_sweep(cfg: RunConfig, out_root, jobs: int = 1) -> Path:
    """Run every cell (optionally in parallel) and write ``results.csv`` in grid order."""
    out = Path(out_root) / config_hash(cfg.canonical())
    cells_root = out / "cells"
    cells_root.mkdir(parents=True, exist_ok=True)
    cells = sweep_cells(cfg)
    tasks = [(i, cfg, c, cells_root) for i, c in enumerate(cells)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_run_cell, tasks))
    else:
        rows = [_run_cell(t) for t in tasks]
    rows.sort(key=lambda r: r["index"])
    with open(out / "results.csv", "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=RESULT_COLUMNS)
        writer.writeheader()
        for row in rows:
            writer.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in row.items()})
    decided = [r for r in rows if r["consistent"] != ""]
    summary = {"config": cfg.canonical(), "config_hash": out.name, "cells": len(rows),
               "failed_cells": sum(r["status"] != "ok" for r in rows),
               "contradictions": sum(r["consistent"] is False for r in decided),
               "rows": rows}
    (out / "summary.json").write_text(json.dumps(_json_num(summary), indent=2, sort_keys=True))
    return out


# ---------------------------------------------------------------------- main

def _emit_error(exc: Exception, code: int) -> int:
    print(json.dumps({"error": type(exc).__name__, "detail": str(exc)}), file=sys.stderr)
    return code


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="inls", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="action", required=True)
    run = sub.add_parser("run", help="execute a JSON run config")
    run.add_argument("config")
    run.add_argument("--out", default="out", help="output root (default: out)")
    run.add_argument("--jobs", type=int, default=1, help="parallel sweep cells")
    args = parser.parse_args(argv)
    try:
        if args.jobs < 1:
            raise ValidationError(f"--jobs must be at least 1, got {args.jobs}")
        cfg = load_config(args.config)
        if cfg.command == "sweep":
            out = run_sweep(cfg, args.out, args.jobs)
        else:
            out = execute(cfg, args.out)
    except InlsError as exc:
        return _emit_error(exc, exc.exit_code)
    except Exception as exc:
        return _emit_error(exc, 4)
    print(str(out))
    return 0


if __name__ == "__main__":
    sys.exit(main())
