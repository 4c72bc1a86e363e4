"""Lyapunov and persistence functionals evaluated on simulator states.

Each functional is a sum of a susceptible-cell term per class, an age integral
weighted by the remaining-production weight gamma_j, and V (and A) terms:

* ``W``  targets E0:  sum N_j U_j(T_j; E0) + sum int gamma_j i_j + V
* ``W1`` targets E*:  sum N_j U_j(T_j; E*) + sum int gamma_j i*_j H(i_j/i*_j)
  + V* H(V/V*) + (q h / k) A
* ``W2`` targets E-hat: as W1 with E-hat values and the antibody term
  (q/k) int_{A-hat}^A (h + s)(s - A-hat)/s ds
* ``phi`` = sum int gamma_j i_j + V

with ``H(x) = x - 1 - ln x``.  On the simulator grid the density ratio
``i_j / i*_j`` is constant within a cell (both carry the same survival
factor), so the age integrals reduce to exact sums against the precomputed
cell weights ``int gamma sigma``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

from agevir.errors import DomainError
from agevir.scenario import Scenario

RATIO_FLOOR = 1e-300
DESCENT_RTOL = 1e-8
_LINEAR_IN_T = {"bilinear", "saturated"}


def h_function(x):
    """H(x) = x - 1 - ln x for x > 0."""
    arr = np.asarray(x, dtype=float)
    if np.any(~(arr > 0)):
        raise DomainError(f"H(x) needs x > 0, got {x}")
    u = arr - 1.0
    near = np.abs(u) < 0.5
    out = np.empty_like(arr)
    # log1p keeps accuracy near 1; x - 1 would round to -1 for tiny x
    out[near] = u[near] - np.log1p(u[near])
    out[~near] = u[~near] - np.log(arr[~near])
    return float(out) if out.ndim == 0 else out


def _susceptible_term(inc, T: float, T_ref: float, ratio_fn) -> float:
    """T - T_ref - int_{T_ref}^T ratio(s) ds."""
    if not T > 0:
        raise DomainError(f"susceptible density must be positive, got {T}")
    if inc.kind in _LINEAR_IN_T:
        return T_ref * h_function(T / T_ref)
    val, _ = quad(ratio_fn, T_ref, T, epsabs=0.0, epsrel=1e-12, limit=200)
    return T - T_ref - val


def antibody_term(A: float, A_hat: float, q: float, k: float, h: float) -> float:
    """(q/k) int_{A_hat}^A (h + s)(s - A_hat)/s ds in closed form."""
    if not A > 0:
        raise DomainError(f"antibody level must be positive, got {A}")
    return q / k * (0.5 * (A - A_hat) ** 2 + h * A_hat * h_function(A / A_hat))


def _gamma_integral(state) -> float:
    g = state.grid
    return float(np.sum(state.cohorts * g.G) + np.sum(g.tail_gamma * state.tail))


def _ratio_integral(state, steady, flags=None) -> float:
    """sum_j int gamma_j i*_j H(i_j / i*_j) on the grid."""
    g = state.grid
    total = 0.0
    for j, hstar in enumerate(steady.boundary):
        if hstar <= 0:
            raise DomainError(f"target profile of class {j + 1} vanishes")
        r = state.cohorts[j] / hstar
        if np.any(r <= 0):
            raise DomainError(f"i_{j + 1} vanishes where the target profile is positive")
        low = r < RATIO_FLOOR
        if np.any(low):
            if flags is not None:
                flags["floored"] = flags.get("floored", 0) + int(low.sum())
            r = np.maximum(r, RATIO_FLOOR)
        total += hstar * float(g.G[j] @ h_function(r))
        if g.tail_S[j] > 0:
            J_star = hstar * g.tail_S[j]
            rt = state.tail[j] / J_star
            if rt <= 0:
                raise DomainError(f"i_{j + 1} tail vanishes")
            total += g.tail_G[j] * hstar * h_function(max(rt, RATIO_FLOOR))
    return total


def lyapunov_W(state, scenario: Scenario) -> float:
    """Functional for E0; zero exactly at E0."""
    total = 0.0
    for j, cl in enumerate(scenario.classes):
        inc, T0 = cl.incidence, cl.T0
        ref = inc.dh_dv_at_zero(T0)
        term = _susceptible_term(inc, float(state.T[j]), T0,
                                 lambda s, inc=inc, ref=ref: ref / inc.dh_dv_at_zero(s))
        total += cl.kernel.burst_size * term
    return total + _gamma_integral(state) + state.V


def _uptake_terms(state, scenario, steady) -> float:
    total = 0.0
    for j, cl in enumerate(scenario.classes):
        inc, Ts = cl.incidence, steady.T[j]
        ref = inc._rate(Ts, steady.V)
        term = _susceptible_term(inc, float(state.T[j]), Ts,
                                 lambda s, inc=inc, ref=ref: ref / inc._rate(s, steady.V))
        total += cl.kernel.burst_size * term
    return total


def lyapunov_W1(state, scenario: Scenario, e_star, flags=None) -> float:
    """Functional for E*; needs T, V and every cohort strictly positive."""
    if not state.V > 0:
        raise DomainError("V must be positive for the E* functional")
    g = scenario.globals
    return (_uptake_terms(state, scenario, e_star) + _ratio_integral(state, e_star, flags)
            + e_star.V * h_function(state.V / e_star.V) + g.q * g.h / g.k * state.A)


def lyapunov_W2(state, scenario: Scenario, e_hat, flags=None) -> float:
    """Functional for E-hat; needs A > 0 in addition to the W1 conditions."""
    if not state.V > 0:
        raise DomainError("V must be positive for the E-hat functional")
    g = scenario.globals
    return (_uptake_terms(state, scenario, e_hat) + _ratio_integral(state, e_hat, flags)
            + e_hat.V * h_function(state.V / e_hat.V)
            + antibody_term(state.A, e_hat.A, g.q, g.k, g.h))


def persistence_phi(state, scenario: Scenario) -> float:
    """sum_j int gamma_j i_j + V."""
    return _gamma_integral(state) + state.V


def make_evaluators(scenario: Scenario, grid, kinds) -> dict:
    """Map diagnostic names to callables state -> float (NaN when undefined).

    Target equilibria always come from the equilibria solver.
    """
    from agevir import equilibria

    out = {}
    for kind in kinds:
        if kind == "W":
            out[kind] = lambda s: lyapunov_W(s, scenario)
        elif kind == "phi":
            out[kind] = lambda s: persistence_phi(s, scenario)
        elif kind in ("W1", "W2"):
            solver = equilibria.solve_immune_free if kind == "W1" else equilibria.solve_antibody
            target = solver(scenario)
            if target is None:
                raise DomainError(f"{kind} needs a target equilibrium that does not exist "
                                  "for this scenario")
            fn = lyapunov_W1 if kind == "W1" else lyapunov_W2
            out[kind] = _guarded(fn, scenario, target)
        else:
            raise DomainError(f"unknown diagnostic {kind!r}")
    return out


def _guarded(fn, scenario, target):
    def ev(state):
        try:
            return fn(state, scenario, target)
        except DomainError:
            return math.nan
    return ev


@dataclass
class DescentReport:
    max_slope: float
    tolerance: float
    first_violation: float | None
    defined_samples: int
    initial_value: float

    @property
    def passed(self) -> bool:
        return self.first_violation is None


def descent_check(times, values, rtol: float = DESCENT_RTOL) -> DescentReport:
    """Largest upward finite-difference slope of a sampled functional.

    Undefined (NaN) samples are skipped; the tolerance is ``rtol`` times the
    first defined value per day.
    """
    t = np.asarray(times, dtype=float)
    v = np.asarray(values, dtype=float)
    ok = ~np.isnan(v)
    t, v = t[ok], v[ok]
    if len(v) < 2:
        return DescentReport(0.0, 0.0, None, len(v), float(v[0]) if len(v) else math.nan)
    slope = np.diff(v) / np.diff(t)
    tol = rtol * abs(v[0])
    bad = np.nonzero(slope > tol)[0]
    first = float(t[bad[0]]) if bad.size else None
    return DescentReport(float(slope.max()), tol, first, len(v), float(v[0]))
