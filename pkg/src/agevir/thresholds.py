"""Reproduction numbers and regime classification.

R_j = N_j / c * dh_j/dV(lambda_j/d_j, 0) is the virion yield of one virion in
class j of a fully susceptible host, R0 their sum.  R* evaluates the same
yield along the steady-state nullcline at the antibody activation load
V = b h / k.  R_AN = k V* / (b h) measures the antibody response at E*.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

from scipy.optimize import brentq

from agevir.equilibria import nullcline_f, psi, solve_immune_free
from agevir.errors import SolverError, ValidationError
from agevir.incidence import Bilinear, Saturated
from agevir.kernels import ConstantDeath, DelayedConstant
from agevir.scenario import Scenario

BOUNDARY_TOL = 1e-9


class Regime(str, enum.Enum):
    INFECTION_FREE = "InfectionFree"
    IMMUNE_FREE = "ImmuneFree"
    ANTIBODY_IMMUNE = "AntibodyImmune"

    def __str__(self):
        return self.value


@dataclass
class ThresholdReport:
    r_js: tuple[float, ...]
    r0: float
    r_star: float
    regime: Regime
    r_an: float | None = None
    v_star: float | None = None
    boundary_flags: list[str] = field(default_factory=list)

    def as_dict(self) -> dict:
        return {"r_js": list(self.r_js), "r0": self.r0, "r_star": self.r_star,
                "r_an": self.r_an, "v_star": self.v_star, "regime": self.regime.value,
                "boundary_flags": list(self.boundary_flags)}


def class_numbers(scenario: Scenario) -> tuple[float, ...]:
    return tuple(cl.kernel.burst_size / scenario.c * cl.incidence.dh_dv_at_zero(cl.T0)
                 for cl in scenario.classes)


def r0(scenario: Scenario) -> float:
    """Basic reproduction number, summed over classes in index order."""
    return sum(class_numbers(scenario))


def r_star(scenario: Scenario) -> float:
    """Viral reproduction number at the antibody activation load b h / k."""
    v = scenario.antibody_activation_load
    return sum(cl.kernel.burst_size * psi(scenario, j, v)
               for j, cl in enumerate(scenario.classes)) / scenario.c


def r_an(scenario: Scenario, v_star: float) -> float:
    """Antibody-response reproduction number k V* / (b h)."""
    return v_star / scenario.antibody_activation_load


def _reducible_params(scenario: Scenario):
    omegas = set()
    rows = []
    for j, cl in enumerate(scenario.classes):
        death, prod, inc = cl.kernel.death, cl.kernel.production, cl.incidence
        if not isinstance(death, ConstantDeath) or not isinstance(prod, DelayedConstant):
            raise ValidationError(f"classes[{j}]: closed forms need constant death and "
                                  "delayed-constant production")
        if isinstance(inc, Saturated):
            beta, alpha = inc.beta, inc.alpha
        elif isinstance(inc, Bilinear):
            beta, alpha = inc.beta, 0.0
        else:
            raise ValidationError(f"classes[{j}]: closed forms need saturated incidence")
        omegas.add(prod.omega)
        rows.append((cl.lam, cl.d, beta, alpha, death.delta_star, prod.p_star, prod.omega))
    if len(omegas) != 1:
        raise ValidationError("closed forms need one shared production onset")
    return rows


def dde_closed_forms(scenario: Scenario) -> tuple[float, float]:
    """(R0, R*) for constant death, delayed-constant production, saturated incidence."""
    g = scenario.globals
    bh = g.b * g.h
    r0_sum = rs_sum = 0.0
    for lam, d, beta, alpha, dstar, pstar, omega in _reducible_params(scenario):
        yield_ = pstar * math.exp(-dstar * omega) * lam * beta / dstar
        r0_sum += yield_ / d
        rs_sum += g.k * yield_ / (g.k * d + (d * alpha + beta) * bh)
    return r0_sum / g.c, rs_sum / g.c


def classify(scenario: Scenario, *, with_r_an: bool = True) -> ThresholdReport:
    """Thresholds plus the regime they select.

    R0 <= 1 is InfectionFree; otherwise R* <= 1 is ImmuneFree (R* = 1 is
    flagged, the stability results assume strict inequality) and R* > 1 is
    AntibodyImmune.
    """
    rjs = class_numbers(scenario)
    total = sum(rjs)
    rs = r_star(scenario)
    flags = []
    if abs(total - 1.0) < BOUNDARY_TOL:
        flags.append("R0 within 1e-9 of 1")
    if abs(rs - 1.0) < BOUNDARY_TOL:
        flags.append("R* within 1e-9 of 1")
    if total <= 1.0:
        regime = Regime.INFECTION_FREE
    elif rs <= 1.0:
        regime = Regime.IMMUNE_FREE
    else:
        regime = Regime.ANTIBODY_IMMUNE
    rep = ThresholdReport(rjs, total, rs, regime, boundary_flags=flags)
    if with_r_an and total > 1.0:
        est = solve_immune_free(scenario)
        if est is not None:
            rep.v_star = est.V
            rep.r_an = r_an(scenario, est.V)
    return rep


def critical_value(scenario: Scenario, path: str, lo: float, hi: float,
                   which: str = "r0") -> float:
    """Parameter value at ``path`` where R0 (or R*) crosses 1, log-bracketed."""
    fn = {"r0": r0, "r_star": r_star}[which]

    def gap(logx):
        return fn(scenario.replace_value(path, math.exp(logx))) - 1.0

    a, b = math.log(lo), math.log(hi)
    if gap(a) * gap(b) > 0:
        raise SolverError(f"{which} does not cross 1 for {path} in [{lo}, {hi}]")
    return math.exp(brentq(gap, a, b, xtol=1e-14))


__all__ = ["Regime", "ThresholdReport", "class_numbers", "r0", "r_star", "r_an",
           "dde_closed_forms", "classify", "critical_value", "nullcline_f"]
