"""Localized virial quantities, the fate classifier and the scattering proxy.

The virial quantities use the same discrete forms as :mod:`inls.functionals`
so that, for phi = r^2 on the support of u, ``virial_second`` reproduces
8*K(u) to rounding. With w = r*u and radial u the second-order virial
expression becomes

    16*pi * [ int phi'' |w'|^2 dr + int (phi'''/r) |w|^2 dr ]
    - 2 int (phi'/r)(x.gradV)|u|^2 dx
    - int (phi'' + (2+b) phi'/r) |x|^-b |u|^4 dx
    - int (Laplacian^2 phi) |u|^2 dx,

and int phi''|w'|^2 is evaluated through the sixth-order stencil as
Re sum phi'' conj(w) (-w'') h + (1/2) sum phi'''' |w|^2 h.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from functools import cached_property
from typing import Mapping

import numpy as np
from numpy.polynomial import polynomial as P
from scipy.integrate import simpson

from .errors import (EmptyTrajectory, MissingGroundState, OutcomeMismatch,
                     ValidationError)
from .functionals import Thresholds, kfun, kin_product, me_product, thresholds
from .grid import (RadialField, RadialGrid, neg_laplacian_w, singular_weights,
                   trapezoid_weights)
from .potentials import (THEOREMS, Potential, eval_potential, hypothesis_check,
                         x_dot_grad_v)

CUTOFF_KINDS = ("quadratic_capped", "exterior_step")
PREDICTIONS = ("global_scattering", "global", "blowup_or_growup", "undetermined")


def _smoothstep(order: int) -> np.ndarray:
    """Coefficients of s on [0, 1] with s(0)=0, s(1)=1 and s^(k) = 0 at both ends for k <= order."""
    d = P.polymul(P.polypow([0.0, 1.0], order), P.polypow([1.0, -1.0], order))
    s = P.polyint(d)
    return s / P.polyval(1.0, s)


# s' vanishes to third order at both ends, so blends built from it are C^4.
_STEP = _smoothstep(3)


@dataclass(frozen=True)
class CutoffProfile:
    """Radial weight phi(r) for localized virial identities.

    ``quadratic_capped``: phi = r^2 on [0, R]; on [R, 2R]
    phi' = 2r(1 - s((r-R)/R)) with a smoothstep s, so phi is constant for
    r >= 2R, 0 <= phi <= r^2, phi'' <= 2 and phi is C^4 (degree 9 on the
    blend interval).

    ``exterior_step``: phi = 0 on [0, R/2], phi = 1 for r >= R; phi' is a
    trapezoid with smoothstep ramps of width R/8 and height 8/(3R) <= 4/R,
    so phi is C^4 and nondecreasing.
    """

    kind: str
    R: float

    def __post_init__(self):
        if self.kind not in CUTOFF_KINDS:
            raise ValidationError(f"cutoff kind must be one of {CUTOFF_KINDS}, got {self.kind!r}")
        if not (np.isfinite(self.R) and self.R > 0):
            raise ValidationError(f"cutoff radius must be positive, got {self.R}")
        object.__setattr__(self, "R", float(self.R))

    @classmethod
    def quadratic_capped(cls, R: float) -> "CutoffProfile":
        return cls("quadratic_capped", R)

    @classmethod
    def exterior_step(cls, R: float) -> "CutoffProfile":
        return cls("exterior_step", R)

    @cached_property
    def _pieces(self):
        # list of (r_lo, r_hi, phi polynomial in r - r_lo); beyond the last piece phi is constant
        R = self.R
        if self.kind == "quadratic_capped":
            # phi'(r) = 2r(1 - s(x)), x = (r-R)/R, written in t = r - R
            s_t = _STEP / R ** np.arange(len(_STEP))
            dphi = 2.0 * P.polymul([R, 1.0], P.polysub([1.0], s_t))
            blend = P.polyadd([R * R], P.polyint(dphi))
            return [(0.0, R, np.array([0.0, 0.0, 1.0]), True), (R, 2.0 * R, blend, False)]
        a, height = R / 8.0, 8.0 / (3.0 * R)
        s_t = _STEP / a ** np.arange(len(_STEP))
        up = height * P.polyint(s_t)
        up_end = P.polyval(a, up)
        flat = np.array([up_end, height])
        flat_end = up_end + height * (R / 2.0 - 2.0 * a)
        # falling ramp: phi' = height * s(1 - t/a) = height * (1 - s(t/a))
        down = P.polyadd([flat_end], P.polyint(height * P.polysub([1.0], s_t)))
        return [(0.0, R / 2.0, np.array([0.0]), False),
                (R / 2.0, R / 2.0 + a, up, False),
                (R / 2.0 + a, R - a, flat, False),
                (R - a, R, down, False)]

    @cached_property
    def plateau(self) -> float:
        lo, hi, poly, _ = self._pieces[-1]
        return float(P.polyval(hi - lo, poly))

    def derivatives(self, r, order: int = 4) -> np.ndarray:
        """Array of shape (order+1, len(r)) holding phi, phi', ..., phi^(order)."""
        r = np.asarray(r, dtype=float)
        out = np.zeros((order + 1,) + r.shape)
        out[0] = self.plateau
        done = np.zeros(r.shape, dtype=bool)
        for lo, hi, poly, _ in self._pieces:
            m = (r >= lo) & (r < hi) & ~done
            if not m.any():
                continue
            t = r[m] - lo
            p = poly
            for k in range(order + 1):
                out[k][m] = P.polyval(t, p) if len(p) else 0.0
                p = P.polyder(p) if len(p) > 1 else np.array([0.0])
            done |= m
        return out

    def __call__(self, r) -> np.ndarray:
        return self.derivatives(r, 0)[0]

    def d1_over_r(self, r) -> np.ndarray:
        """phi'(r)/r, finite at r = 0."""
        r = np.asarray(r, dtype=float)
        d1 = self.derivatives(r, 1)[1]
        out = np.empty_like(r)
        pos = r > 0
        out[pos] = d1[pos] / r[pos]
        out[~pos] = 2.0 if self.kind == "quadratic_capped" else 0.0
        return out

    def d3_over_r(self, r) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        d3 = self.derivatives(r, 3)[3]
        out = np.zeros_like(r)
        pos = r > 0
        out[pos] = d3[pos] / r[pos]
        return out

    def bilaplacian(self, r) -> np.ndarray:
        """Radial Laplacian^2 phi = phi'''' + 4 phi'''/r in three dimensions."""
        return self.derivatives(r, 4)[4] + 4.0 * self.d3_over_r(r)


def _vals(u):
    return u.values if isinstance(u, RadialField) else np.asarray(u)


def variance(grid: RadialGrid, u, phi: CutoffProfile) -> float:
    """I = int phi |u|^2 dx."""
    a2 = np.abs(_vals(u)) ** 2
    return float(trapezoid_weights(grid) @ (phi(grid.nodes) * a2))


def virial_first(grid: RadialGrid, u, phi: CutoffProfile) -> float:
    """I' = 2 Im int grad(phi).grad(u) conj(u) dx.

    Evaluated as 8*pi*h * sum phi_i Im(conj(w_i) (-w'')_i), which is the
    exact time derivative of `variance` along the semi-discrete flow (the
    potential and nonlinear terms are real and drop out).
    """
    r = grid.nodes
    w = r * _vals(u)
    w = w.copy()
    w[-1] = 0.0
    aw = neg_laplacian_w(grid, w)
    return float(8.0 * np.pi * grid.h * np.sum(phi(r) * np.imag(np.conj(w) * aw)))


def virial_second(grid: RadialGrid, u, V: Potential, b: float, phi: CutoffProfile) -> float:
    """I'' for the localized variance, in the discrete forms of the solver."""
    r = grid.nodes
    vals = _vals(u)
    a2 = vals.real**2 + vals.imag**2
    w = r * vals
    w = w.copy()
    w[-1] = 0.0
    der = phi.derivatives(r, 4)
    d1r, d3r = phi.d1_over_r(r), phi.d3_over_r(r)
    h = grid.h
    aw = neg_laplacian_w(grid, w)
    w2 = w.real**2 + w.imag**2
    grad = 16.0 * np.pi * h * (np.sum(der[2] * np.real(np.conj(w) * aw))
                               + np.sum((0.5 * der[4] + d3r) * w2))
    tw = trapezoid_weights(grid)
    pot = 0.0 if V.is_zero else -2.0 * float(tw @ (d1r * x_dot_grad_v(V, r) * a2))
    nl = -float(singular_weights(grid, b) @ ((der[2] + (2.0 + b) * d1r) * a2 * a2))
    bil = -float(tw @ ((der[4] + 4.0 * d3r) * a2))
    return float(grad) + pot + nl + bil


def exterior_mass(grid: RadialGrid, u, R: float) -> float:
    """int_{|x| > R} |u|^2 dx.

    Composite Simpson from the first node at or beyond R, plus the partial
    cell [R, r_k] integrated with a local degree-5 interpolant.
    """
    if not 0 < R < grid.r_max:
        raise ValidationError(f"R must lie in (0, r_max), got {R}")
    r = grid.nodes
    f = np.abs(_vals(u)) ** 2 * r**2
    k = int(np.ceil(R / grid.h - 1e-12))
    k = min(k, grid.n)
    total = simpson(f[k:], dx=grid.h) if grid.n - k >= 2 else (
        0.5 * grid.h * (f[k] + f[-1]) if grid.n - k == 1 else 0.0)
    gap = r[k] - R
    if gap > 0:
        lo = min(max(k - 3, 0), grid.n - 5)
        idx = np.arange(lo, lo + 6)
        coef = np.polyfit(r[idx] - R, f[idx], 5)
        anti = np.polyint(coef)
        total += np.polyval(anti, gap) - np.polyval(anti, 0.0)
    return float(4.0 * np.pi * total)


def diagnostic_observers(V: Potential, b: float, phi: CutoffProfile,
                         R: float | None = None) -> dict:
    """Observer callables for `inls.evolution.evolve` (columns I, Iprime, Isecond, exterior_mass_R)."""
    obs = {
        "I": lambda f: variance(f.grid, f, phi),
        "Iprime": lambda f: virial_first(f.grid, f, phi),
        "Isecond": lambda f: virial_second(f.grid, f, V, b, phi),
    }
    if R is not None:
        obs["exterior_mass_R"] = lambda f: exterior_mass(f.grid, f, R)
    return obs


@dataclass
class ClassificationReport:
    thresholds: Thresholds | None
    me: float
    kin: float
    hypothesis: dict
    prediction: str
    margins: tuple
    branch: str
    notes: list = field(default_factory=list)
    observed: str | None = None
    consistent: bool | None = None

    def with_outcome(self, outcome: str) -> "ClassificationReport":
        """Copy of the report with an observed trajectory outcome attached."""
        return ClassificationReport(self.thresholds, self.me, self.kin, self.hypothesis,
                                    self.prediction, self.margins, self.branch,
                                    list(self.notes), outcome,
                                    consistency(self.prediction, outcome))

    def to_dict(self) -> dict:
        def num(x):
            return x if np.isfinite(x) else ("-inf" if x < 0 else "inf" if x > 0 else "nan")
        return {
            "thresholds": None if self.thresholds is None else asdict(self.thresholds),
            "me": num(self.me), "kin": num(self.kin),
            "hypothesis": {k: v.to_dict() for k, v in self.hypothesis.items()},
            "prediction": self.prediction,
            "margins": [num(m) for m in self.margins],
            "branch": self.branch, "notes": list(self.notes),
            "observed": self.observed, "consistent": self.consistent,
        }


# Products within this relative band of a threshold count as on the boundary.
BOUNDARY_BAND = 1e-6


def consistency(prediction: str, outcome: str | None) -> bool | None:
    """Whether an observed outcome agrees with a prediction.

    ``resolution_lost`` and undetermined predictions are inconclusive
    (None). A predicted blow-up or grow-up run that completes counts as a
    contradiction: within the simulated window nothing was detected.
    """
    if outcome is None or prediction == "undetermined" or outcome == "resolution_lost":
        return None
    if prediction in ("global_scattering", "global"):
        return outcome == "completed"
    return outcome == "blowup_detected"


def _branch(V: Potential, grid: RadialGrid) -> str:
    v = eval_potential(V, grid.nodes)
    if np.all(v >= 0):
        return "free"
    if np.all(v <= 0):
        return "well"
    return "mixed"


def classify(u0: RadialField, V: Potential, b: float,
             grounds: Mapping[str, object], *, hypothesis_grid: RadialGrid | None = None
             ) -> ClassificationReport:
    """Predict the fate of the solution starting at ``u0``.

    ``grounds`` maps "free" to the free ground state (always required) and
    "with_potential" to the potential ground state (required when V <= 0
    with a nonzero negative part).

    Raises
    ------
    MissingGroundState
        If the ground state needed for the selected branch is absent.
    """
    if "free" not in grounds:
        raise MissingGroundState("the free ground state is required")
    branch = _branch(V, u0.grid)
    notes = []
    hyp = {tid: hypothesis_check(V, tid, hypothesis_grid) for tid in THEOREMS}
    me = me_product(u0, V, b)
    try:
        kin = kin_product(u0, V, b)
    except ValidationError:
        kin = float("nan")
        notes.append("||H^1/2 u0||^2 is negative")
    if branch == "mixed":
        notes.append("V changes sign; the two-branch threshold scheme does not apply")
        return ClassificationReport(None, me, kin, hyp, "undetermined",
                                    (float("nan"), float("nan")), branch, notes)
    if branch == "well":
        if "with_potential" not in grounds:
            raise MissingGroundState("V <= 0 with V_- != 0 needs the potential ground state")
        th = thresholds(b, "well", grounds["with_potential"])
    else:
        th = thresholds(b, "free", grounds["free"])
    margins = (th.script_e - me, th.script_k - kin)
    below_e = margins[0] > BOUNDARY_BAND * th.script_e
    below_k = margins[1] > BOUNDARY_BAND * th.script_k
    above_k = -margins[1] > BOUNDARY_BAND * th.script_k
    prediction = "undetermined"
    if below_e and below_k:
        if hyp["T1.2"].passed:
            prediction = "global_scattering"
        elif hyp["T1.1"].passed:
            prediction = "global"
    elif below_e and above_k:
        if hyp["T1.4"].passed:
            prediction = "blowup_or_growup"
        else:
            notes.append("above the kinetic threshold but the blow-up hypotheses fail")
    else:
        notes.append("mass-energy product not strictly below the threshold"
                     if not below_e else "kinetic product on the threshold")
    return ClassificationReport(th, me, kin, hyp, prediction, margins, branch, notes)


@dataclass(frozen=True)
class ScatteringProxy:
    score: float
    monotone_fraction: float
    decay_exponent: float

    def to_dict(self) -> dict:
        return asdict(self)


def scattering_proxy(traj) -> ScatteringProxy:
    """Decay of int |x|^-b |u|^4 along a completed run.

    score = 1 - quartic(t_end)/max_t quartic(t), clipped to [0, 1];
    monotone_fraction is the share of consecutive records over which the
    quartic term does not increase; decay_exponent is the least-squares
    slope of -log quartic against log t over the last half of the run.

    Raises
    ------
    OutcomeMismatch
        If the run did not complete.
    EmptyTrajectory
        If fewer than two records exist.
    """
    if traj.outcome != "completed":
        raise OutcomeMismatch(f"scattering proxy needs a completed run, got {traj.outcome}")
    q = traj.series("quartic")
    t = np.asarray(traj.times, dtype=float)
    if len(q) < 2:
        raise EmptyTrajectory("scattering proxy needs at least two records")
    peak = float(np.max(q))
    score = 0.0 if peak <= 0 else float(np.clip(1.0 - q[-1] / peak, 0.0, 1.0))
    mono = float(np.mean(np.diff(q) <= 0))
    half = t >= 0.5 * t[-1]
    sel = half & (t > 0) & (q > 0)
    if sel.sum() >= 2:
        slope = np.polyfit(np.log(t[sel]), np.log(q[sel]), 1)[0]
        expo = float(-slope)
    else:
        expo = float("nan")
    return ScatteringProxy(score, mono, expo)


@dataclass(frozen=True)
class CoercivityFit:
    """K(u) against -delta * ||H^1/2 u||^2 along a run."""

    delta_ls: float
    delta_uniform: float
    all_negative: bool
    all_positive: bool

    def to_dict(self) -> dict:
        return asdict(self)


def coercivity_fit(traj) -> CoercivityFit:
    """Least-squares delta in K ~ -delta*kinetic_h, and the largest delta valid at every record."""
    k = traj.series("kfun")
    h = traj.series("kinetic_h")
    if len(k) == 0:
        raise EmptyTrajectory("no records")
    delta_ls = float(-(k @ h) / (h @ h)) if h @ h > 0 else float("nan")
    ratio = -k / np.where(h > 0, h, np.nan)
    return CoercivityFit(delta_ls, float(np.nanmin(ratio)), bool(np.all(k < 0)),
                         bool(np.all(k > 0)))


def virial_remainder(grid: RadialGrid, u, V: Potential, b: float, R: float) -> float:
    """virial_second with quadratic_capped(R) minus 8*K(u)."""
    phi = CutoffProfile.quadratic_capped(R)
    return virial_second(grid, u, V, b, phi) - 8.0 * kfun(grid, u, V, b)


__all__ = [
    "CUTOFF_KINDS", "PREDICTIONS", "BOUNDARY_BAND", "CutoffProfile", "variance",
    "virial_first", "virial_second", "exterior_mass", "diagnostic_observers",
    "ClassificationReport", "consistency", "classify", "ScatteringProxy",
    "scattering_proxy", "CoercivityFit", "coercivity_fit", "virial_remainder",
]
