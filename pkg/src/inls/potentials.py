"""Analytic radial potentials, Kato norm and hypothesis checks.

Every family supplies V(r) and r*V'(r) in closed form, so sign and
integrability conditions never rely on numerical differentiation.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import factorial

import numpy as np
from scipy.integrate import quad

from .errors import ConsistencyError, ValidationError
from .grid import RadialGrid

KINDS = ("zero", "gaussian_repulsive", "gaussian_well", "softcore")

# Tail exponents are probed over this decade of radii.
_TAIL_PROBE = (1.0e3, 1.0e4)
# Decay exponent must beat the borderline value by this margin.
_TAIL_EPS = 0.05
_KATO_BOUND = 4.0 * np.pi


class _Divergent:
    """Sentinel for a divergent Kato norm."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "Divergent"

    def __reduce__(self):
        return (_Divergent, ())


DIVERGENT = _Divergent()


@dataclass(frozen=True)
class Potential:
    """Radial potential of a named analytic family with amplitude ``c``.

    ``gaussian_well`` stores V = -c*exp(-r^2); all families need c >= 0.
    """

    kind: str
    c: float = 0.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValidationError(f"unknown potential kind {self.kind!r}; expected one of {KINDS}")
        if not np.isfinite(self.c) or self.c < 0:
            raise ValidationError(f"potential amplitude must be finite and >= 0, got {self.c}")
        object.__setattr__(self, "c", float(self.c))

    @classmethod
    def from_spec(cls, spec: dict) -> "Potential":
        if not isinstance(spec, dict) or "kind" not in spec:
            raise ValidationError(f"potential spec needs a 'kind' field, got {spec!r}")
        extra = set(spec) - {"kind", "c"}
        if extra:
            raise ValidationError(f"unknown potential fields {sorted(extra)}")
        return cls(spec["kind"], float(spec.get("c", 0.0)))

    def to_spec(self) -> dict:
        return {"kind": self.kind, "c": self.c}

    @property
    def is_zero(self) -> bool:
        return self.kind == "zero" or self.c == 0.0

    @property
    def has_negative_part(self) -> bool:
        return self.kind == "gaussian_well" and self.c > 0

    def __call__(self, r):
        return eval_potential(self, r)


def eval_potential(V: Potential, r):
    """Closed-form V(r)."""
    r = np.asarray(r, dtype=float)
    if V.kind == "zero":
        return np.zeros_like(r)
    if V.kind == "gaussian_repulsive":
        return V.c * np.exp(-r * r)
    if V.kind == "gaussian_well":
        return -V.c * np.exp(-r * r)
    return V.c / (1.0 + r * r)


def x_dot_grad_v(V: Potential, r):
    """Closed-form x.grad V = r V'(r)."""
    r = np.asarray(r, dtype=float)
    if V.kind == "zero":
        return np.zeros_like(r)
    if V.kind == "gaussian_repulsive":
        return -2.0 * V.c * r * r * np.exp(-r * r)
    if V.kind == "gaussian_well":
        return 2.0 * V.c * r * r * np.exp(-r * r)
    return -2.0 * V.c * r * r / (1.0 + r * r) ** 2


def laplacian_weight(V: Potential, r):
    """2V + x.grad V, the weight in the potential Pohozaev correction."""
    return 2.0 * eval_potential(V, r) + x_dot_grad_v(V, r)


def taylor_r2(V: Potential, order: int) -> list[float]:
    """Coefficients v_k with V(r) = sum_k v_k r^(2k), k < order."""
    k = np.arange(order)
    if V.kind == "zero":
        return [0.0] * order
    if V.kind == "softcore":
        return list(V.c * (-1.0) ** k)
    sign = 1.0 if V.kind == "gaussian_repulsive" else -1.0
    return [sign * V.c * (-1.0) ** j / factorial(j) for j in range(order)]


def tail_exponent(f) -> float:
    """Decay exponent p of |f(s)| ~ s^(-p) over the probe decade.

    A tail that vanishes (underflows) returns +inf.
    """
    s0, s1 = _TAIL_PROBE
    f0, f1 = abs(float(f(s0))), abs(float(f(s1)))
    if f0 == 0.0 or f1 == 0.0:
        return np.inf
    return -float(np.log(f1 / f0) / np.log(s1 / s0))


def kato_norm(V: Potential, part: str = "abs", rho=None):
    """Global Kato norm sup_x int |V(y)|/|x-y| dy of a radial potential.

    For radial |V| the inner integral at |x| = rho reduces to
    4*pi*[(1/rho) int_0^rho |V| s^2 ds + int_rho^inf |V| s ds]; the
    supremum is taken over the sample radii ``rho`` and the rho -> 0 limit.

    Parameters
    ----------
    part : {"abs", "negative"}
        Evaluate the norm of |V| or of the negative part V_-.
    rho : array_like, optional
        Sample radii; defaults to a log-spaced set on [1e-4, 1e3].

    Returns
    -------
    float or DIVERGENT
    """
    if part == "abs":
        g = lambda s: abs(float(eval_potential(V, s)))
    elif part == "negative":
        g = lambda s: max(-float(eval_potential(V, s)), 0.0)
    else:
        raise ValidationError(f"part must be 'abs' or 'negative', got {part!r}")
    if g(0.0) == 0.0 and tail_exponent(g) == np.inf and all(
            g(s) == 0.0 for s in np.linspace(0, 10, 101)):
        return 0.0
    if tail_exponent(g) <= 2.0 + _TAIL_EPS:
        return DIVERGENT
    if rho is None:
        rho = np.geomspace(1e-4, 1e3, 400)

    def outer(a):
        val, _ = quad(lambda s: g(s) * s, a, np.inf, epsabs=1e-16, epsrel=1e-13, limit=400)
        return val

    best = 4.0 * np.pi * outer(0.0)
    for p in np.asarray(rho, dtype=float):
        if p <= 0:
            continue
        inner, _ = quad(lambda s: g(s) * s * s, 0.0, p, epsabs=1e-16, epsrel=1e-13, limit=400)
        best = max(best, 4.0 * np.pi * (inner / p + outer(p)))
    return best


@dataclass(frozen=True)
class Check:
    name: str
    status: str  # "pass" | "fail" | "inapplicable"
    evidence: dict = field(default_factory=dict)


@dataclass(frozen=True)
class HypothesisReport:
    theorem_id: str
    checks: tuple
    overall: str

    @property
    def passed(self) -> bool:
        return self.overall == "pass"

    def to_dict(self) -> dict:
        return {
            "theorem_id": self.theorem_id,
            "overall": self.overall,
            "checks": [{"name": c.name, "status": c.status, "evidence": c.evidence}
                       for c in self.checks],
        }


THEOREMS = ("T1.1", "T1.2", "T1.4")

# Closed-form sign truth per family: (V >= 0, x.gradV <= 0, 2V + x.gradV >= 0).
def _symbolic_signs(V: Potential) -> dict:
    zero_amp = V.c == 0.0
    if V.kind == "zero" or zero_amp:
        return {"v_nonneg": True, "xgradv_nonpos": True, "pohozaev_weight_nonneg": True}
    if V.kind == "gaussian_repulsive":
        # 2V + x.gradV = 2c e^{-r^2}(1 - r^2) < 0 for r > 1
        return {"v_nonneg": True, "xgradv_nonpos": True, "pohozaev_weight_nonneg": False}
    if V.kind == "gaussian_well":
        return {"v_nonneg": False, "xgradv_nonpos": False, "pohozaev_weight_nonneg": False}
    # softcore: 2V + x.gradV = 2c/(1+r^2)^2
    return {"v_nonneg": True, "xgradv_nonpos": True, "pohozaev_weight_nonneg": True}


def _default_grid() -> RadialGrid:
    return RadialGrid(32.0, 8192)


def _sign_check(name, key, V, samples, expect_nonneg, grid) -> Check:
    symbolic = _symbolic_signs(V)[key]
    extreme = float(samples.min() if expect_nonneg else samples.max())
    sampled = extreme >= 0.0 if expect_nonneg else extreme <= 0.0
    if sampled != symbolic:
        raise ConsistencyError(
            f"{name}: closed-form sign analysis says {symbolic}, grid sampling says {sampled}")
    label = "min_sampled" if expect_nonneg else "max_sampled"
    return Check(name, "pass" if sampled else "fail",
                 {label: extreme, "nodes": grid.n + 1, "symbolic": symbolic})


def _lp_check(name, f, delta_min_exclusive: float | None = None) -> Check:
    """Membership of a bounded radial function in L^p(R^3) from its tail.

    |f| ~ r^-p is in L^delta iff delta > 3/p. With ``delta_min_exclusive``
    None the check is for delta = 3/2 exactly.
    """
    p = tail_exponent(f)
    if delta_min_exclusive is None:
        ok = p > 2.0 + _TAIL_EPS
        ev = {"tail_exponent": p, "delta": 1.5}
    else:
        # some delta > delta_min works iff 3/p < infinity, i.e. any decay
        ok = p > _TAIL_EPS
        lower = 3.0 / p if np.isfinite(p) else 0.0
        ev = {"tail_exponent": p, "delta_lower_exclusive": max(lower, delta_min_exclusive)}
    return Check(name, "pass" if ok else "fail", ev)


def _t11_checks(V: Potential, grid: RadialGrid) -> list[Check]:
    r = grid.nodes
    route_a = [_lp_check("V in L^3/2", lambda s: eval_potential(V, s))]
    kn = kato_norm(V, "negative", rho=r[1:][:: max(1, grid.n // 512)])
    if kn is DIVERGENT:
        route_a.append(Check("Kato norm of V_- below 4 pi", "fail", {"kato_norm": "Divergent"}))
    else:
        route_a.append(Check("Kato norm of V_- below 4 pi",
                             "pass" if kn < _KATO_BOUND else "fail",
                             {"kato_norm": kn, "bound": _KATO_BOUND}))
    route_b = [
        _sign_check("V >= 0", "v_nonneg", V, eval_potential(V, r), True, grid),
        _lp_check("V in L^delta, delta > 3/2", lambda s: eval_potential(V, s), 1.5),
    ]
    a_ok = all(c.status == "pass" for c in route_a)
    b_ok = all(c.status == "pass" for c in route_b)
    if a_ok and not b_ok:
        route_b = [Check(c.name, "inapplicable", c.evidence) for c in route_b]
    elif b_ok and not a_ok:
        route_a = [Check(c.name, "inapplicable", c.evidence) for c in route_a]
    return route_a + route_b


def hypothesis_check(V: Potential, theorem_id: str, grid: RadialGrid | None = None) -> HypothesisReport:
    """Evaluate the potential assumptions of a theorem.

    T1.1 (global existence) accepts either route: V in L^3/2 with
    ||V_-||_K < 4 pi, or V >= 0 with V in L^delta for some delta > 3/2;
    checks of a failing route are marked inapplicable when the other
    route passes. T1.2 (scattering) adds x.gradV <= 0 and
    |x||gradV| in L^3/2. T1.4 (blow-up) needs V >= 0, V and x.gradV in
    L^delta (delta > 3/2), x.gradV <= 0 and 2V + x.gradV >= 0.

    Sign conditions are decided in closed form per family and confirmed
    by sampling every node of ``grid``; a disagreement raises
    ConsistencyError.
    """
    if theorem_id not in THEOREMS:
        raise ValidationError(f"unknown theorem id {theorem_id!r}; expected one of {THEOREMS}")
    grid = grid or _default_grid()
    r = grid.nodes
    xg = x_dot_grad_v(V, r)
    if theorem_id == "T1.1":
        checks = _t11_checks(V, grid)
    elif theorem_id == "T1.2":
        checks = _t11_checks(V, grid) + [
            _sign_check("x.gradV <= 0", "xgradv_nonpos", V, xg, False, grid),
            _lp_check("|x||gradV| in L^3/2", lambda s: x_dot_grad_v(V, s)),
        ]
    else:
        checks = [
            _sign_check("V >= 0", "v_nonneg", V, eval_potential(V, r), True, grid),
            _lp_check("V in L^delta, delta > 3/2", lambda s: eval_potential(V, s), 1.5),
            _lp_check("x.gradV in L^delta, delta > 3/2", lambda s: x_dot_grad_v(V, s), 1.5),
            _sign_check("x.gradV <= 0", "xgradv_nonpos", V, xg, False, grid),
            _sign_check("2V + x.gradV >= 0", "pohozaev_weight_nonneg", V,
                        laplacian_weight(V, r), True, grid),
        ]
    overall = "pass" if all(c.status != "fail" for c in checks) else "fail"
    return HypothesisReport(theorem_id, tuple(checks), overall)
