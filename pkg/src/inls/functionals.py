"""Conserved and variational functionals and the threshold algebra.

All functionals use the discrete forms of :mod:`inls.grid`, which are the
forms the time integrator conserves: trapezoid weights for quadratic
terms, endpoint-corrected weights for the r^-b quartic term and the
sixth-order Dirichlet form for ||grad u||^2.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .errors import BranchMismatch, ConsistencyError, IndefiniteKinetic, ZeroField
from .grid import (RadialField, RadialGrid, dirichlet_form, singular_weights,
                   trapezoid_weights)
from .potentials import Potential, eval_potential, laplacian_weight, x_dot_grad_v

SNAPSHOT_COLUMNS = ("t", "mass", "energy", "kinetic_h", "grad_sq", "quartic",
                    "kfun", "me_product", "kin_product")


def critical_index(b: float) -> float:
    """s_c = (1+b)/2 for the cubic problem in three dimensions."""
    return 0.5 * (1.0 + b)


def _vals(u):
    return u.values if isinstance(u, RadialField) else np.asarray(u)


def _abs2(u):
    v = _vals(u)
    return v.real**2 + v.imag**2


def mass(grid: RadialGrid, u) -> float:
    """M(u) = int |u|^2 dx."""
    return float(trapezoid_weights(grid) @ _abs2(u))


def grad_sq(grid: RadialGrid, u) -> float:
    """||grad u||^2."""
    return dirichlet_form(grid, _vals(u))


def quartic(grid: RadialGrid, u, b: float) -> float:
    """int |x|^-b |u|^4 dx."""
    a2 = _abs2(u)
    return float(singular_weights(grid, b) @ (a2 * a2))


def potential_energy(grid: RadialGrid, u, V: Potential) -> float:
    """int V |u|^2 dx."""
    if V.is_zero:
        return 0.0
    return float(trapezoid_weights(grid) @ (eval_potential(V, grid.nodes) * _abs2(u)))


def xgradv_term(grid: RadialGrid, u, V: Potential) -> float:
    """int (x.grad V) |u|^2 dx."""
    if V.is_zero:
        return 0.0
    return float(trapezoid_weights(grid) @ (x_dot_grad_v(V, grid.nodes) * _abs2(u)))


def pohozaev_weight_term(grid: RadialGrid, u, V: Potential) -> float:
    """int (2V + x.grad V) |u|^2 dx."""
    if V.is_zero:
        return 0.0
    return float(trapezoid_weights(grid) @ (laplacian_weight(V, grid.nodes) * _abs2(u)))


def energy(grid: RadialGrid, u, V: Potential, b: float) -> float:
    """E(u) = ||grad u||^2/2 + int V|u|^2/2 - int |x|^-b |u|^4 / 4."""
    return (0.5 * grad_sq(grid, u) + 0.5 * potential_energy(grid, u, V)
            - 0.25 * quartic(grid, u, b))


def kinetic_h(grid: RadialGrid, u, V: Potential) -> float:
    """||H^1/2 u||^2 = ||grad u||^2 + int V|u|^2.

    Raises
    ------
    IndefiniteKinetic
        If the value is negative.
    """
    val = grad_sq(grid, u) + potential_energy(grid, u, V)
    if val < 0:
        raise IndefiniteKinetic(f"||H^1/2 u||^2 = {val:.6g} < 0")
    return val


def jv(grid: RadialGrid, u, V: Potential, b: float) -> float:
    """Weinstein-type ratio int |x|^-b|u|^4 / (||u||^(1-b) ||H^1/2 u||^(3+b))."""
    m = mass(grid, u)
    if m == 0:
        raise ZeroField("J_V is undefined for the zero field")
    h = grad_sq(grid, u) + potential_energy(grid, u, V)
    if not h > 0:
        raise IndefiniteKinetic(f"||H^1/2 u||^2 = {h:.6g} is not positive")
    return quartic(grid, u, b) / (m ** ((1 - b) / 2) * h ** ((3 + b) / 2))


def kfun(grid: RadialGrid, u, V: Potential, b: float) -> float:
    """Virial functional ||grad u||^2 - int x.gradV |u|^2 / 2 - (3+b)/4 int |x|^-b|u|^4."""
    return (grad_sq(grid, u) - 0.5 * xgradv_term(grid, u, V)
            - 0.25 * (3.0 + b) * quartic(grid, u, b))


def _me(m, e, sc):
    if e <= 0:
        return -np.inf
    return m ** (1 - sc) * e**sc


def me_product(u: RadialField, V: Potential, b: float) -> float:
    """M^(1-s_c) E^s_c, or -inf when E <= 0 (below any threshold)."""
    g = u.grid
    return _me(mass(g, u), energy(g, u, V, b), critical_index(b))


def kin_product(u: RadialField, V: Potential, b: float) -> float:
    """||u||^(2(1-s_c)) ||H^1/2 u||^(2 s_c)."""
    g = u.grid
    sc = critical_index(b)
    return mass(g, u) ** (1 - sc) * kinetic_h(g, u, V) ** sc


@dataclass(frozen=True)
class FunctionalSnapshot:
    t: float
    mass: float
    energy: float
    kinetic_h: float
    grad_sq: float
    quartic: float
    kfun: float
    me_product: float
    kin_product: float

    def as_row(self) -> list:
        return [getattr(self, k) for k in SNAPSHOT_COLUMNS]


def snapshot(grid: RadialGrid, u, V: Potential, b: float, t: float = 0.0) -> FunctionalSnapshot:
    """All functionals of ``u`` at once, sharing intermediate sums."""
    a2 = _abs2(u)
    tw = trapezoid_weights(grid)
    m = float(tw @ a2)
    g = dirichlet_form(grid, _vals(u))
    p = float(singular_weights(grid, b) @ (a2 * a2))
    if V.is_zero:
        pot = xg = 0.0
    else:
        r = grid.nodes
        pot = float(tw @ (eval_potential(V, r) * a2))
        xg = float(tw @ (x_dot_grad_v(V, r) * a2))
    h = g + pot
    e = 0.5 * h - 0.25 * p
    sc = critical_index(b)
    k = g - 0.5 * xg - 0.25 * (3.0 + b) * p
    kin = m ** (1 - sc) * max(h, 0.0) ** sc
    return FunctionalSnapshot(float(t), m, e, h, g, p, k, _me(m, e, sc), kin)


@dataclass(frozen=True)
class Thresholds:
    """Mass-energy and mass-kinetic thresholds and the sharp constant."""

    b: float
    s_c: float
    script_e: float
    script_k: float
    c_gn: float
    branch: str  # "free" (V >= 0) | "well" (V <= 0)
    script_e_direct: float = float("nan")

    def to_dict(self) -> dict:
        return asdict(self)


THRESHOLD_BRANCHES = ("free", "well")

# Direct M^(1-s_c) E^s_c must match the algebraic value to this tolerance.
_DIRECT_TOL = 1e-5


def thresholds(b: float, branch: str, ground) -> Thresholds:
    """Thresholds from a ground state's integrals.

    Branch "free" (V = 0 or V >= 0) uses the free Q and ||grad Q||;
    branch "well" (V <= 0) uses the potential ground state and
    ||H^1/2 Q||. script_k = M^(1-s_c) K^s_c; script_e and c_gn follow from
    the exact relations script_e = (s_c/(3+b))^s_c script_k and
    c_gn = 4/((3+b) script_k). The direct value M^(1-s_c) E^s_c is kept as
    a cross-check.

    Raises
    ------
    BranchMismatch
        If ``ground`` belongs to the other branch or to another b.
    ConsistencyError
        If the direct and algebraic script_e disagree beyond 1e-5.
    """
    if branch not in THRESHOLD_BRANCHES:
        raise BranchMismatch(f"unknown threshold branch {branch!r}")
    expected = "free" if branch == "free" else "with_potential"
    if ground.branch != expected:
        raise BranchMismatch(f"branch {branch!r} needs a {expected} ground state, got {ground.branch}")
    if abs(ground.b - b) > 1e-15:
        raise BranchMismatch(f"ground state solved for b={ground.b}, thresholds requested for b={b}")
    sc = critical_index(b)
    ig = ground.integrals
    kin = ig.grad_sq if branch == "free" else ig.kinetic_h
    script_k = ig.mass ** (1 - sc) * kin**sc
    script_e = (sc / (3 + b)) ** sc * script_k
    c_gn = 4.0 / ((3 + b) * script_k)
    e_direct = _me(ig.mass, 0.5 * kin - 0.25 * ig.quartic, sc)
    if not abs(e_direct - script_e) <= _DIRECT_TOL * script_e:
        raise ConsistencyError(
            f"direct mass-energy product {e_direct:.12g} disagrees with {script_e:.12g}")
    return Thresholds(float(b), sc, script_e, script_k, c_gn, branch, e_direct)
