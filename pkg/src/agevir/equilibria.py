"""Steady states E0, E* and E-hat by bracketed root finding.

The construction follows the monotone reductions of the steady-state system:

* ``nullcline_f``: for fixed V, the uninfected density T solving
  ``lambda - d T - h(T, V) = 0`` on ``(0, lambda/d]``;
* ``psi``: per-virion incidence along that nullcline, decreasing in V;
* ``F(V) = sum_j N_j psi_j(V) - c`` whose positive root is V* (antibody free);
* ``G(A) = sum_j N_j psi_j(b (h + A) / k) - c - q A`` whose positive root is
  the antibody level of E-hat.

All roots are bracketed and refined with Brent's method (scipy ``brentq``),
which is bisection safeguarded secant/inverse-quadratic steps.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from agevir.errors import DomainError, SolverError
from agevir.scenario import Scenario

XTOL = 1e-12
RES_RTOL = 1e-10
MAX_DOUBLINGS = 60
SCAN_POINTS = 64


def _root(fn, lo, hi, what):
    try:
        return brentq(fn, lo, hi, xtol=XTOL, rtol=4 * np.finfo(float).eps, maxiter=500)
    except (ValueError, RuntimeError) as exc:
        raise SolverError(f"{what}: root refinement failed on [{lo}, {hi}] ({exc})") from None


# -- nullclines -------------------------------------------------------------------


def nullcline_f(scenario: Scenario, j: int, V: float) -> float:
    """Uninfected density of class ``j`` at steady state for virion load ``V``."""
    if not (math.isfinite(V) and V >= 0):
        raise DomainError(f"virion density must be finite and non-negative, got {V}")
    cl = scenario.classes[j]
    closed = cl.incidence.nullcline(cl.lam, cl.d, V)
    if closed is not None:
        return min(closed, cl.T0)  # roundoff must not push f_j above lambda_j/d_j
    return nullcline_root(scenario, j, V)


def nullcline_root(scenario: Scenario, j: int, V: float) -> float:
    """Generic bracketed solve of the nullcline, ignoring any closed form."""
    cl = scenario.classes[j]
    T0 = cl.T0
    if V == 0.0:
        return T0
    inc = cl.incidence

    def g(T):
        return cl.lam - cl.d * T - inc._rate(T, V)

    if g(T0) > 0:
        raise SolverError(f"classes[{j}]: nullcline bracket failed at V={V}; "
                          "incidence violates monotonicity")
    if g(T0) == 0:
        return T0
    return _root(g, 0.0, T0, f"classes[{j}] nullcline")


def psi(scenario: Scenario, j: int, V: float) -> float:
    """Per-virion incidence along the nullcline, hbar(f_j(V), V)."""
    T = nullcline_f(scenario, j, V)
    return scenario.classes[j].incidence._hbar(T, V)


def F(scenario: Scenario, V: float) -> float:
    """Antibody-free steady-state balance; its positive root is V*."""
    return sum(cl.kernel.burst_size * psi(scenario, j, V)
               for j, cl in enumerate(scenario.classes)) - scenario.c


def G(scenario: Scenario, A: float) -> float:
    """Antibody steady-state balance; its positive root is the antibody level."""
    g = scenario.globals
    V = g.b * (g.h + A) / g.k
    return F(scenario, V) - g.q * A


# -- steady states -------------------------------------------------------------------


@dataclass(frozen=True)
class SteadyState:
    """One steady state with its age profiles i_j(theta) = h_j sigma_j(theta)."""

    kind: str
    T: tuple[float, ...]
    V: float
    A: float
    boundary: tuple[float, ...]
    residuals: dict[str, float] = field(default_factory=dict)
    scenario: Scenario | None = field(default=None, repr=False, compare=False)

    def profile(self, j: int, theta):
        return self.boundary[j] * self.scenario.classes[j].kernel.survival(theta)

    @property
    def I(self) -> tuple[float, ...]:
        """Infected totals int i_j."""
        return tuple(b * cl.kernel.mean_lifetime
                     for b, cl in zip(self.boundary, self.scenario.classes))

    @property
    def max_residual(self) -> float:
        return max(self.residuals.values()) if self.residuals else 0.0

    def as_dict(self) -> dict:
        return {"kind": self.kind, "T": list(self.T), "I": list(self.I), "V": self.V,
                "A": self.A, "residual": self.max_residual}


def residuals(scenario: Scenario, T, V, A) -> dict[str, float]:
    """Scale-relative residuals of every steady-state equation.

    The production integral uses the quadrature route for the burst size so
    this check is independent of the closed forms used in the solve.
    """
    g = scenario.globals
    out = {}
    prod = 0.0
    for j, cl in enumerate(scenario.classes):
        h = cl.incidence._rate(T[j], V)
        out[f"T_{j + 1}"] = abs(cl.lam - cl.d * T[j] - h) / cl.lam
        prod += h * cl.kernel.burst_size_quadrature()
    loss = g.c * V + g.q * A * V
    out["V"] = abs(prod - loss) / max(loss, prod, 1e-300) if (prod or loss) else 0.0
    growth = g.k * A * V / (g.h + A)
    out["A"] = abs(growth - g.b * A) / max(g.b * A, 1e-300) if A else 0.0
    return out


def _build(scenario, kind, V, A):
    T = tuple(nullcline_f(scenario, j, V) for j in range(scenario.n))
    bnd = tuple(cl.incidence._rate(T[j], V) for j, cl in enumerate(scenario.classes))
    return SteadyState(kind, T, V, A, bnd, residuals(scenario, T, V, A), scenario)


def infection_free(scenario: Scenario) -> SteadyState:
    """E0: T_j = lambda_j/d_j and nothing else present."""
    T = tuple(cl.T0 for cl in scenario.classes)
    return SteadyState("E0", T, 0.0, 0.0, tuple(0.0 for _ in T),
                       residuals(scenario, T, 0.0, 0.0), scenario)


def _upper_bracket(fn, start, what):
    hi = start
    for _ in range(MAX_DOUBLINGS):
        if fn(hi) < 0:
            return hi
        hi *= 2.0
    raise SolverError(f"{what}: no sign change up to {hi:.3g}; supply a bracket")


def _count_sign_changes(fn, hi):
    xs = np.concatenate([[0.0], np.geomspace(hi * 1e-9, hi, SCAN_POINTS)])
    vals = np.array([fn(x) for x in xs])
    return int(np.sum(np.sign(vals[1:]) != np.sign(vals[:-1])))


def solve_immune_free(scenario: Scenario, bracket: tuple[float, float] | None = None
                      ) -> SteadyState | None:
    """E*, or None when F(0) <= 0 (R0 <= 1) so no positive root exists."""
    fn = lambda v: F(scenario, v)  # noqa: E731
    if fn(0.0) <= 0:
        return None
    if bracket is not None:
        lo, hi = bracket
    else:
        lo = 0.0
        start = scenario.virion_bound
        if not math.isfinite(start) or start <= 0:
            start = 1.0
        hi = _upper_bracket(fn, start, "immune-free equilibrium")
    if _count_sign_changes(fn, hi) > 1:
        raise SolverError("immune-free equilibrium: F has several sign changes; "
                          "uniqueness fails for this incidence")
    V = _root(fn, lo, hi, "immune-free equilibrium")
    if abs(fn(V)) > RES_RTOL * scenario.c:
        raise SolverError(f"immune-free equilibrium: |F(V*)|={abs(fn(V)):.3g} above tolerance")
    return _build(scenario, "EStar", V, 0.0)


def solve_antibody(scenario: Scenario, bracket: tuple[float, float] | None = None
                   ) -> SteadyState | None:
    """E-hat, or None when G(0) <= 0 (R* <= 1)."""
    g = scenario.globals
    fn = lambda a: G(scenario, a)  # noqa: E731
    if fn(0.0) <= 0:
        return None
    if bracket is not None:
        lo, hi = bracket
    else:
        lo = 0.0
        start = scenario.antibody_bound
        if not math.isfinite(start) or start <= 0:
            start = 1.0
        hi = _upper_bracket(fn, start, "antibody equilibrium")
    A = _root(fn, lo, hi, "antibody equilibrium")
    if abs(fn(A)) > RES_RTOL * scenario.c:
        raise SolverError(f"antibody equilibrium: |G(A)|={abs(fn(A)):.3g} above tolerance")
    V = g.b * (g.h + A) / g.k
    return _build(scenario, "EHat", V, A)


def all_steady_states(scenario: Scenario) -> list[SteadyState]:
    out = [infection_free(scenario)]
    for solver in (solve_immune_free, solve_antibody):
        s = solver(scenario)
        if s is not None:
            out.append(s)
    return out


def target_state(scenario: Scenario) -> SteadyState:
    """The steady state the classification predicts to be globally stable."""
    from agevir.thresholds import Regime, classify

    regime = classify(scenario).regime
    if regime is Regime.INFECTION_FREE:
        return infection_free(scenario)
    if regime is Regime.IMMUNE_FREE:
        return solve_immune_free(scenario)
    return solve_antibody(scenario)
