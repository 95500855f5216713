"""Time integration of i u_t = (-Laplacian + V) u - |x|^-b |u|^2 u.

The state is w = r*u on the interior nodes, where the radial Laplacian is
w''/r. The one-step schemes share the discrete operator of
:mod:`inls.grid`:

* ``"midpoint"`` (default): the conservative Crank-Nicolson midpoint rule
  with the nonlinearity averaged as (|w+|^2 + |w|^2)/2 * (w+ + w)/2. It
  conserves the discrete mass and the discrete energy exactly, up to the
  fixed-point tolerance of the implicit solve.
* ``"strang"``: half linear Crank-Nicolson step, exact nonlinear phase
  rotation, half linear step. Mass-conservative; energy error O(dt^2).
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from scipy.linalg import lapack

from .errors import InlsError, ValidationError
from .functionals import SNAPSHOT_COLUMNS, FunctionalSnapshot, snapshot
from .grid import (BANDWIDTH, RadialField, RadialGrid, extrapolate_origin,
                   neg_laplacian_w, read_field_csv, resolution_defect,
                   singular_weights, stiffness_band, write_field_csv)
from .potentials import Potential, eval_potential

SCHEMES = ("midpoint", "strang")
OUTCOMES = ("completed", "blowup_detected", "resolution_lost")

_FIXED_POINT_TOL = 1e-14
_FIXED_POINT_MAXIT = 60
_CONTRACTION_LIMIT = 0.5
_COARSEN_AFTER = 16


class NonFiniteStep(InlsError):
    """The time step produced non-finite values or its implicit solve failed."""

    exit_code = 3


@dataclass(frozen=True)
class Sponge:
    """Absorbing layer -i*sigma*s(r)*u on [r_max - width, r_max]."""

    width: float
    strength: float

    def profile(self, r: np.ndarray, r_max: float) -> np.ndarray:
        x = np.clip((r - (r_max - self.width)) / self.width, 0.0, 1.0)
        return x**3 * (10.0 - 15.0 * x + 6.0 * x * x)


@dataclass(frozen=True)
class EvolveConfig:
    t_end: float
    dt: float = 1e-3
    record_every: int = 10
    sponge: Sponge | None = None
    blowup_factor: float = 10.0
    drift_tol: float = 1e-5
    resolution_tol: float = 1e-2
    scheme: str = "midpoint"
    monotone_window: int = 20
    max_subdivision: int = 12

    def __post_init__(self):
        if not (np.isfinite(self.dt) and self.dt > 0):
            raise ValidationError(f"dt must be positive, got {self.dt}")
        if not (np.isfinite(self.t_end) and self.t_end > 0):
            raise ValidationError(f"t_end must be positive, got {self.t_end}")
        if int(self.record_every) != self.record_every or self.record_every < 1:
            raise ValidationError(f"record_every must be a positive integer, got {self.record_every}")
        if not self.blowup_factor > 1:
            raise ValidationError(f"blowup_factor must exceed 1, got {self.blowup_factor}")
        if not self.drift_tol > 0:
            raise ValidationError(f"drift_tol must be positive, got {self.drift_tol}")
        if not self.resolution_tol > 0:
            raise ValidationError(f"resolution_tol must be positive, got {self.resolution_tol}")
        if self.scheme not in SCHEMES:
            raise ValidationError(f"scheme must be one of {SCHEMES}, got {self.scheme!r}")
        if self.sponge is not None and not (self.sponge.width > 0 and self.sponge.strength >= 0):
            raise ValidationError("sponge needs width > 0 and strength >= 0")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["sponge"] = None if self.sponge is None else asdict(self.sponge)
        return d


@dataclass
class Trajectory:
    times: np.ndarray
    snapshots: list
    final_field: RadialField
    outcome: str
    t_star: float | None = None
    trigger: dict = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)

    def series(self, name: str) -> np.ndarray:
        if name in self.extra:
            return np.asarray(self.extra[name])
        return np.array([getattr(s, name) for s in self.snapshots])

    def relative_drift(self, name: str) -> float:
        v = self.series(name)
        scale = abs(v[0]) if v[0] != 0 else 1.0
        return float(np.max(np.abs(v - v[0])) / scale)

    def write_series_csv(self, path) -> None:
        cols = list(SNAPSHOT_COLUMNS) + list(self.extra)
        data = np.column_stack([self.series(c) if c != "t" else self.times for c in cols])
        np.savetxt(Path(path), data, delimiter=",", header=",".join(cols), comments="",
                   fmt="%.17g")


class Propagator:
    """One-step map on the interior unknowns w_1..w_{n-1}."""

    def __init__(self, grid: RadialGrid, V: Potential, b: float, dt: float,
                 scheme: str = "midpoint", sponge: Sponge | None = None,
                 max_subdivision: int = 12):
        if scheme not in SCHEMES:
            raise ValidationError(f"scheme must be one of {SCHEMES}, got {scheme!r}")
        if sponge is not None and not (0 < sponge.width < grid.r_max / 4):
            raise ValidationError(f"sponge width must lie in (0, r_max/4), got {sponge.width}")
        self.grid, self.V, self.b, self.dt = grid, V, float(b), float(dt)
        self.scheme, self.max_subdivision = scheme, max_subdivision
        r = grid.nodes[1:-1]
        self.r = r
        diag = eval_potential(V, r).astype(complex)
        if sponge is not None:
            diag = diag - 1j * sponge.strength * sponge.profile(r, grid.r_max)
        self.diag = diag
        # nonlinear coefficient consistent with the discrete quartic form
        sw = singular_weights(grid, b)[1:-1]
        self.kappa = sw / (4.0 * np.pi * grid.h * r**4)
        self.band = stiffness_band(grid)
        self._lu = {}
        self.depth = self.streak = self.substeps = self.max_depth = 0

    def apply_h(self, w: np.ndarray) -> np.ndarray:
        full = np.concatenate(([0.0], w, [0.0]))
        return neg_laplacian_w(self.grid, full)[1:-1] + self.diag * w

    def _factor(self, alpha: float):
        # LU of I + i*alpha*H in LAPACK band storage
        if alpha not in self._lu:
            p = BANDWIDTH
            ab = 1j * alpha * self.band.astype(complex)
            ab[2 * p] += 1.0 + 1j * alpha * self.diag
            lu, piv, info = lapack.zgbtrf(ab, p, p)
            if info != 0:
                raise NonFiniteStep(f"band factorisation failed (info={info})")
            self._lu[alpha] = (lu, piv)
        return self._lu[alpha]

    def _solve(self, alpha, rhs):
        lu, piv = self._factor(alpha)
        x, info = lapack.zgbtrs(lu, BANDWIDTH, BANDWIDTH, rhs, piv)
        if info != 0:
            raise NonFiniteStep(f"band solve failed (info={info})")
        return x

    def _linear(self, w, tau):
        """Crank-Nicolson for i w_t = H w over time tau."""
        return self._solve(0.5 * tau, w - 0.5j * tau * self.apply_h(w))

    def _midpoint(self, w, tau):
        rhs = w - 0.5j * tau * self.apply_h(w)
        a0 = w.real**2 + w.imag**2
        new = w
        prev = np.inf
        with np.errstate(all="ignore"):
            for it in range(_FIXED_POINT_MAXIT):
                nl = self.kappa * 0.5 * (new.real**2 + new.imag**2 + a0) * 0.5 * (new + w)
                nxt = self._solve(0.5 * tau, rhs + 1j * tau * nl)
                delta = np.max(np.abs(nxt - new)) / np.max(np.abs(nxt))
                new = nxt
                if not np.isfinite(delta):
                    return None
                if delta <= _FIXED_POINT_TOL:
                    return new
                # slow contraction: a smaller step is cheaper than iterating on
                if it >= 2 and delta > _CONTRACTION_LIMIT * prev:
                    return None
                prev = delta
        return None

    def _strang(self, w, tau):
        w = self._linear(w, 0.5 * tau)
        w = w * np.exp(1j * tau * self.kappa * (w.real**2 + w.imag**2))
        return self._linear(w, 0.5 * tau)

    def _try(self, w, tau):
        out = self._strang(w, tau) if self.scheme == "strang" else self._midpoint(w, tau)
        if out is None or not np.all(np.isfinite(out)):
            return None
        return out

    def advance(self, w: np.ndarray) -> np.ndarray:
        """One step of size dt, taken as 2^depth equal substeps.

        The depth is kept between calls: it grows by one whenever a substep
        fails and shrinks by one after a run of successful substeps that
        ends on a boundary of the coarser level.
        """
        top = self.max_subdivision
        pos, end = 0, 1 << top
        while pos < end:
            tau = self.dt / (1 << self.depth)
            out = self._try(w, tau)
            if out is None:
                if self.depth >= top:
                    raise NonFiniteStep(f"implicit solve failed at step size {tau:.3e}")
                self.depth += 1
                self.streak = 0
                self.max_depth = max(self.max_depth, self.depth)
                continue
            w = out
            pos += 1 << (top - self.depth)
            if self.depth:
                self.substeps += 1
            self.streak += 1
            if (self.depth and self.streak >= _COARSEN_AFTER
                    and pos % (1 << (top - self.depth + 1)) == 0):
                self.depth -= 1
                self.streak = 0
        return w

    def state(self) -> dict:
        return {"depth": self.depth, "streak": self.streak, "substeps": self.substeps,
                "max_depth": self.max_depth}

    def set_state(self, st: dict) -> None:
        self.depth, self.streak = int(st["depth"]), int(st["streak"])
        self.substeps, self.max_depth = int(st["substeps"]), int(st["max_depth"])

    def to_field(self, w: np.ndarray) -> RadialField:
        u = np.zeros(self.grid.n + 1, dtype=complex)
        u[1:-1] = w / self.r
        u[0] = extrapolate_origin(u)
        return RadialField(self.grid, u)

    def from_field(self, u: RadialField) -> np.ndarray:
        return self.r * u.values[1:-1]


def step(u: RadialField, V: Potential, b: float, dt: float, *, scheme: str = "midpoint",
         sponge: Sponge | None = None) -> RadialField:
    """Advance ``u`` by one time step ``dt`` (negative dt steps backwards).

    Raises
    ------
    NonFiniteStep
        Non-finite values or a failed implicit solve; callers treat this as
        a blow-up signal.
    """
    if not np.isfinite(dt) or dt == 0:
        raise ValidationError(f"dt must be finite and non-zero, got {dt}")
    prop = Propagator(u.grid, V, b, dt, scheme, sponge)
    return prop.to_field(prop.advance(prop.from_field(u)))


def nonlinear_phase(u: RadialField, b: float, dt: float) -> RadialField:
    """Exact flow of i u_t = -r^-b |u|^2 u over dt (pointwise phase rotation)."""
    grid = u.grid
    v = u.values.copy()
    r = grid.nodes
    # at the origin the weight is evaluated at r_1/2
    rr = r.copy()
    rr[0] = 0.5 * r[1]
    phase = rr ** (-b) * np.abs(v) ** 2
    return RadialField(grid, v * np.exp(1j * dt * phase))


def config_hash(obj) -> str:
    """Stable short hash of a JSON-serialisable object."""
    text = json.dumps(obj, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(text.encode()).hexdigest()[:16]


def _monotone(values, window):
    if len(values) < window:
        return False
    tail = np.asarray(values[-window:])
    return bool(np.all(np.diff(tail) > 0))


def _net_growth(values, window):
    # growth of the latest record over the start of the window
    return len(values) > 1 and values[-1] > values[-min(window, len(values))]


class _Monitor:
    """Record-level bookkeeping and outcome decisions."""

    def __init__(self, cfg: EvolveConfig, conservation: bool):
        self.cfg = cfg
        self.conservation = conservation
        self.times, self.snaps, self.grads, self.defects = [], [], [], []
        self.extra = {}

    def add(self, t, snap, extra, defect):
        self.times.append(t)
        self.defects.append(defect)
        self.snaps.append(snap)
        self.grads.append(np.sqrt(max(snap.grad_sq, 0.0)))
        for k, v in extra.items():
            self.extra.setdefault(k, []).append(v)

    def drifts(self):
        s0, s = self.snaps[0], self.snaps[-1]
        e_scale = abs(s0.energy) if s0.energy != 0 else max(s0.kinetic_h, 1e-300)
        return abs(s.energy - s0.energy) / e_scale, abs(s.mass - s0.mass) / s0.mass

    def decide(self):
        """Return (outcome, trigger) or None to keep going."""
        cfg = self.cfg
        grad_ratio = self.grads[-1] / self.grads[0] if self.grads[0] > 0 else np.inf
        monotone = _monotone(self.grads, cfg.monotone_window)
        e_drift, m_drift = self.drifts()
        defect = self.defects[-1]
        drifting = self.conservation and (e_drift > cfg.drift_tol or m_drift > cfg.drift_tol)
        unresolved = defect > cfg.resolution_tol
        trig = {"grad_ratio": float(grad_ratio), "energy_drift": float(e_drift),
                "mass_drift": float(m_drift), "resolution_defect": float(defect),
                "monotone_growth": monotone}
        if grad_ratio >= cfg.blowup_factor and (
                (self.conservation and e_drift > cfg.drift_tol) or unresolved or monotone):
            return "blowup_detected", trig
        trig["net_growth"] = _net_growth(self.grads, cfg.monotone_window)
        if (drifting or unresolved) and not trig["net_growth"]:
            return "resolution_lost", trig
        return None

    def on_failure(self, message):
        monotone = _monotone(self.grads, self.cfg.monotone_window)
        grad_ratio = self.grads[-1] / self.grads[0] if self.grads[0] > 0 else np.inf
        trig = {"grad_ratio": float(grad_ratio), "monotone_growth": monotone,
                "failure": message}
        if monotone or grad_ratio >= self.cfg.blowup_factor:
            return "blowup_detected", trig
        return "resolution_lost", trig


def _save_checkpoint(directory, field_u, step_index, t, cfg, V, b, chash, mon, prop_state):
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    write_field_csv(directory / "checkpoint_field.csv", field_u)
    meta = {
        "t": t, "step": step_index, "dt": cfg.dt, "b": b, "potential": V.to_spec(),
        "sponge": None if cfg.sponge is None else asdict(cfg.sponge),
        "config_hash": chash,
        "times": mon.times, "snapshots": [s.as_row() for s in mon.snaps],
        "extra": mon.extra, "defects": mon.defects, "propagator": prop_state,
    }
    tmp = directory / "checkpoint.json.tmp"
    tmp.write_text(json.dumps(meta))
    tmp.replace(directory / "checkpoint.json")


def evolve(u0: RadialField, V: Potential, b: float, cfg: EvolveConfig, *,
           observers: dict | None = None, checkpoint_dir=None,
           checkpoint_every: int | None = None, resume: bool = False,
           run_hash: str | None = None) -> Trajectory:
    """Integrate from ``u0`` to ``cfg.t_end`` and classify the run.

    A snapshot of all functionals is recorded every ``cfg.record_every``
    steps (and at the final step). ``observers`` maps column names to
    callables f(field) -> float evaluated at each record.

    The run stops with ``blowup_detected`` once ||grad u|| reaches
    ``blowup_factor`` times its initial value while the field is no longer
    resolved, or ||grad u|| has grown monotonically over the last
    ``monotone_window`` records. "Not resolved" means an energy drift beyond
    ``drift_tol`` or a resolution defect (see
    :func:`inls.grid.resolution_defect`) beyond ``resolution_tol``; the
    midpoint scheme conserves the discrete energy exactly, so for it the
    defect is the operative signal. Drift or defect without such growth
    gives ``resolution_lost`` unless ||grad u|| is still above its value
    ``monotone_window`` records earlier, in which case the run continues so a
    collapse in progress can reach the threshold. With a sponge the conservation-based
    declarations are disabled and recorded as such in the metadata.

    Each step may be split into 2^k substeps when the implicit solve does
    not contract (see :meth:`Propagator.advance`); a step that still fails
    at ``max_subdivision`` ends the run with the outcome chosen from the
    records so far.

    Checkpoints (field CSV plus JSON metadata) are written every
    ``checkpoint_every`` steps into ``checkpoint_dir``; with ``resume`` the
    run restarts from the stored state and reproduces the uninterrupted run
    bit for bit.
    """
    grid = u0.grid
    observers = observers or {}
    prop = Propagator(grid, V, b, cfg.dt, cfg.scheme, cfg.sponge, cfg.max_subdivision)
    conservation = cfg.sponge is None
    n_steps = int(round(cfg.t_end / cfg.dt))
    if n_steps < 1:
        raise ValidationError("t_end must cover at least one time step")
    chash = run_hash or config_hash({"cfg": cfg.to_dict(), "b": b, "V": V.to_spec(),
                                     "grid": [grid.r_max, grid.n]})
    mon = _Monitor(cfg, conservation)
    metadata = {"scheme": cfg.scheme, "sponge": cfg.sponge is not None,
                "conservation_checks": conservation, "dt": cfg.dt, "n_steps": n_steps,
                "config_hash": chash}

    def record(field_u, t):
        snap = snapshot(grid, field_u, V, b, t)
        mon.add(t, snap, {k: float(f(field_u)) for k, f in observers.items()},
                resolution_defect(grid, field_u))

    start = 0
    w = prop.from_field(u0)
    if resume:
        if checkpoint_dir is None:
            raise ValidationError("resume requested without a checkpoint directory")
        meta = json.loads((Path(checkpoint_dir) / "checkpoint.json").read_text())
        if meta["config_hash"] != chash:
            raise ValidationError("checkpoint belongs to a different configuration")
        field_u = read_field_csv(Path(checkpoint_dir) / "checkpoint_field.csv", grid)
        w = prop.from_field(field_u)
        start = int(meta["step"])
        mon.times = list(meta["times"])
        mon.snaps = [FunctionalSnapshot(*row) for row in meta["snapshots"]]
        mon.grads = [np.sqrt(max(s.grad_sq, 0.0)) for s in mon.snaps]
        mon.defects = list(meta["defects"])
        mon.extra = {k: list(v) for k, v in meta["extra"].items()}
        prop.set_state(meta["propagator"])
    else:
        record(u0, 0.0)

    outcome, trigger, t_star = "completed", {}, None
    k = start
    while k < n_steps:
        try:
            w = prop.advance(w)
        except NonFiniteStep as exc:
            outcome, trigger = mon.on_failure(str(exc))
            t_star = (k + 1) * cfg.dt
            break
        k += 1
        if k % cfg.record_every == 0 or k == n_steps:
            field_u = prop.to_field(w)
            record(field_u, k * cfg.dt)
            verdict = mon.decide()
            if verdict is not None:
                outcome, trigger = verdict
                t_star = k * cfg.dt
                break
        if checkpoint_dir is not None and checkpoint_every and k % checkpoint_every == 0 \
                and k < n_steps:
            field_u = prop.to_field(w)
            # continue from the serialised state so resumed runs match exactly
            w = prop.from_field(field_u)
            _save_checkpoint(checkpoint_dir, field_u, k, k * cfg.dt, cfg, V, b, chash, mon,
                             prop.state())

    metadata["substeps"] = prop.substeps
    metadata["max_depth"] = prop.max_depth
    metadata["steps_taken"] = k
    return Trajectory(np.array(mon.times), mon.snaps, prop.to_field(w), outcome, t_star,
                      trigger, metadata, {k_: np.array(v) for k_, v in mon.extra.items()})
