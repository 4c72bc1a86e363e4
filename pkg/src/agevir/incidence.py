"""Incidence functions h(T, V) for the infection of target cells by free virus.

Every model is written in per-virion form, ``h(T, V) = V * hbar(T, V)``, so
the rate and the per-virion factor agree to roundoff by construction.  The
closed-form families carry analytic partial derivatives; the tabulated family
interpolates ``hbar`` bilinearly and differentiates by central differences.

Units: with T in cells/ml and V in virions/ml, ``h`` is in cells/ml/day.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, ClassVar

import numpy as np

from agevir.errors import DomainError, ValidationError

# relative step for central differences on tabulated models
FD_REL_STEP = 1e-5


def _check_point(T: float, V: float) -> None:
    if not (math.isfinite(T) and math.isfinite(V)):
        raise DomainError(f"non-finite incidence argument (T={T}, V={V})")
    if T < 0 or V < 0:
        raise DomainError(f"negative incidence argument (T={T}, V={V})")


class Incidence:
    """Base class; subclasses are frozen dataclasses.

    Subclasses implement ``_hbar``, ``_partials`` and ``dh_dv_at_zero``.  The
    underscored methods skip argument validation and are what the integrators
    call in their inner loops.
    """

    kind: ClassVar[str] = ""

    def _hbar(self, T: float, V: float) -> float:
        raise NotImplementedError

    def _rate(self, T: float, V: float) -> float:
        return V * self._hbar(T, V)

    def _partials(self, T: float, V: float) -> tuple[float, float]:
        raise NotImplementedError

    def dh_dv_at_zero(self, T: float) -> float:
        """Return the V-derivative of h at (T, 0), i.e. hbar(T, 0)."""
        raise NotImplementedError

    def nullcline(self, lam: float, d: float, V: float) -> float | None:
        """Closed-form root T of ``lam - d*T - h(T, V) = 0``, or None."""
        return None

    @property
    def smooth(self) -> bool:
        return True

    def to_dict(self) -> dict[str, Any]:
        raise NotImplementedError


@dataclass(frozen=True)
class Bilinear(Incidence):
    """Mass-action incidence ``beta*T*V``."""

    beta: float
    kind: ClassVar[str] = "bilinear"

    def __post_init__(self):
        _positive("beta", self.beta)

    def _hbar(self, T, V):
        return self.beta * T

    def _partials(self, T, V):
        return self.beta * V, self.beta * T

    def dh_dv_at_zero(self, T):
        return self.beta * T

    def nullcline(self, lam, d, V):
        return lam / (d + self.beta * V)

    def to_dict(self):
        return {"kind": self.kind, "beta": self.beta}


@dataclass(frozen=True)
class Saturated(Incidence):
    """Holling type II incidence ``beta*T*V / (1 + alpha*V)``."""

    beta: float
    alpha: float
    kind: ClassVar[str] = "saturated"

    def __post_init__(self):
        _positive("beta", self.beta)
        _nonnegative("alpha", self.alpha)

    def _hbar(self, T, V):
        return self.beta * T / (1.0 + self.alpha * V)

    def _partials(self, T, V):
        den = 1.0 + self.alpha * V
        return self.beta * V / den, self.beta * T / (den * den)

    def dh_dv_at_zero(self, T):
        return self.beta * T

    def nullcline(self, lam, d, V):
        s = 1.0 + self.alpha * V
        return lam * s / (d * s + self.beta * V)

    def to_dict(self):
        return {"kind": self.kind, "beta": self.beta, "alpha": self.alpha}


@dataclass(frozen=True)
class BeddingtonDeAngelis(Incidence):
    """Beddington-DeAngelis response ``beta*T*V / (1 + a*T + b*V)``."""

    beta: float
    a: float
    b: float
    kind: ClassVar[str] = "beddington_deangelis"

    def __post_init__(self):
        _positive("beta", self.beta)
        _nonnegative("a", self.a)
        _nonnegative("b", self.b)

    def _hbar(self, T, V):
        return self.beta * T / (1.0 + self.a * T + self.b * V)

    def _partials(self, T, V):
        den = 1.0 + self.a * T + self.b * V
        den2 = den * den
        return (self.beta * V * (1.0 + self.b * V) / den2,
                self.beta * T * (1.0 + self.a * T) / den2)

    def dh_dv_at_zero(self, T):
        return self.beta * T / (1.0 + self.a * T)

    def nullcline(self, lam, d, V):
        # d*a*T^2 + B*T - lam*(1 + b*V) = 0, positive root in cancellation-free form
        if V == 0.0:
            return lam / d
        s = 1.0 + self.b * V
        B = d * s + self.beta * V - lam * self.a
        disc = math.sqrt(B * B + 4.0 * d * self.a * lam * s)
        if B >= 0:
            return 2.0 * lam * s / (B + disc)
        return (disc - B) / (2.0 * d * self.a)

    def to_dict(self):
        return {"kind": self.kind, "beta": self.beta, "a": self.a, "b": self.b}


@dataclass(frozen=True)
class TabulatedIncidence(Incidence):
    """``hbar`` given on a rectilinear (T, V) grid, bilinear in between.

    Both axes must start at 0 and be strictly increasing.  Evaluation outside
    the table raises :class:`DomainError`; the model is only piecewise smooth,
    which :func:`verify_hypotheses` reports.
    """

    T_grid: tuple[float, ...]
    V_grid: tuple[float, ...]
    values: tuple[tuple[float, ...], ...]
    kind: ClassVar[str] = "tabulated"
    _arr: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        Tg = np.asarray(self.T_grid, dtype=float)
        Vg = np.asarray(self.V_grid, dtype=float)
        vals = np.asarray(self.values, dtype=float)
        if Tg.ndim != 1 or Vg.ndim != 1 or len(Tg) < 2 or len(Vg) < 2:
            raise ValidationError("tabulated incidence needs at least 2 nodes per axis")
        if Tg[0] != 0.0 or Vg[0] != 0.0:
            raise ValidationError("tabulated incidence axes must start at 0")
        if np.any(np.diff(Tg) <= 0) or np.any(np.diff(Vg) <= 0):
            raise ValidationError("tabulated incidence axes must be strictly increasing")
        if vals.shape != (len(Tg), len(Vg)):
            raise ValidationError(
                f"hbar table has shape {vals.shape}, expected {(len(Tg), len(Vg))}")
        if not np.all(np.isfinite(vals)) or np.any(vals < 0):
            raise ValidationError("hbar table must be finite and non-negative")
        object.__setattr__(self, "_arr", (Tg, Vg, vals))

    @classmethod
    def from_function(cls, hbar_fn, T_grid, V_grid) -> "TabulatedIncidence":
        Tg = [float(x) for x in T_grid]
        Vg = [float(x) for x in V_grid]
        vals = tuple(tuple(float(hbar_fn(t, v)) for v in Vg) for t in Tg)
        return cls(tuple(Tg), tuple(Vg), vals)

    @property
    def smooth(self):
        return False

    @property
    def T_max(self) -> float:
        return self._arr[0][-1]

    @property
    def V_max(self) -> float:
        return self._arr[1][-1]

    def _hbar(self, T, V):
        Tg, Vg, vals = self._arr
        if T > Tg[-1] or V > Vg[-1]:
            raise DomainError(
                f"(T={T}, V={V}) outside tabulated range [0,{Tg[-1]}]x[0,{Vg[-1]}]")
        i = min(int(np.searchsorted(Tg, T, side="right")) - 1, len(Tg) - 2)
        j = min(int(np.searchsorted(Vg, V, side="right")) - 1, len(Vg) - 2)
        u = (T - Tg[i]) / (Tg[i + 1] - Tg[i])
        w = (V - Vg[j]) / (Vg[j + 1] - Vg[j])
        return ((1 - u) * (1 - w) * vals[i, j] + u * (1 - w) * vals[i + 1, j]
                + (1 - u) * w * vals[i, j + 1] + u * w * vals[i + 1, j + 1])

    def _partials(self, T, V):
        return (_central_diff(lambda x: self._rate(x, V), T, self.T_max),
                _central_diff(lambda x: self._rate(T, x), V, self.V_max))

    def dh_dv_at_zero(self, T):
        return self._hbar(T, 0.0)

    def to_dict(self):
        Tg, Vg, vals = self._arr
        return {"kind": self.kind, "T": list(map(float, Tg)), "V": list(map(float, Vg)),
                "hbar": [list(map(float, row)) for row in vals]}


def _central_diff(f, x: float, upper: float) -> float:
    step = FD_REL_STEP * max(1.0, abs(x))
    lo, hi = x - step, x + step
    if lo < 0:
        lo = x
    if hi > upper:
        hi = x
    if hi == lo:
        raise DomainError(f"no room for a finite difference at {x}")
    return (f(hi) - f(lo)) / (hi - lo)


def _positive(name, value):
    if not (math.isfinite(value) and value > 0):
        raise ValidationError(f"{name} must be positive and finite, got {value}")


def _nonnegative(name, value):
    if not (math.isfinite(value) and value >= 0):
        raise ValidationError(f"{name} must be non-negative and finite, got {value}")


_KINDS = {cls.kind: cls for cls in (Bilinear, Saturated, BeddingtonDeAngelis)}


def incidence_from_dict(spec: dict[str, Any]) -> Incidence:
    """Build an incidence model from its scenario-file record."""
    spec = dict(spec)
    kind = spec.pop("kind", None)
    if kind == TabulatedIncidence.kind:
        try:
            return TabulatedIncidence(tuple(spec["T"]), tuple(spec["V"]),
                                      tuple(tuple(r) for r in spec["hbar"]))
        except KeyError as exc:
            raise ValidationError(f"tabulated incidence missing field {exc}") from None
    if kind not in _KINDS:
        raise ValidationError(f"unknown incidence kind {kind!r}")
    try:
        return _KINDS[kind](**{k: float(v) for k, v in spec.items()})
    except TypeError as exc:
        raise ValidationError(f"bad fields for {kind} incidence: {exc}") from None


# -- public operations -------------------------------------------------------


def evaluate(model: Incidence, T: float, V: float) -> float:
    """Infection rate h(T, V); exactly zero when T or V is zero."""
    _check_point(T, V)
    return model._rate(T, V)


def hbar(model: Incidence, T: float, V: float) -> float:
    """Per-virion factor h(T, V)/V, with its V -> 0 limit at V = 0."""
    _check_point(T, V)
    return model._hbar(T, V)


def partials(model: Incidence, T: float, V: float) -> tuple[float, float]:
    """Return (dh/dT, dh/dV) at (T, V)."""
    _check_point(T, V)
    return model._partials(T, V)


@dataclass
class HypothesisReport:
    """Outcome of a sampled check of the incidence hypotheses.

    ``h3_decay`` is one of ``"decaying"``, ``"non-decaying"`` or
    ``"not-evaluable"`` (tabulated models cannot be probed past their table).
    """

    h1: bool
    h2: bool
    h3_monotone: bool
    h3_decay: str
    smooth: bool
    first_violation: dict[str, Any] | None = None
    notes: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.h1 and self.h2 and self.h3_monotone and self.h3_decay == "decaying"

    def summary(self) -> str:
        flag = lambda ok: "pass" if ok else "FAIL"  # noqa: E731
        parts = [f"H1 {flag(self.h1)}", f"H2 {flag(self.h2)}",
                 f"H3 monotone {flag(self.h3_monotone)}", f"H3 decay {self.h3_decay}"]
        if not self.smooth:
            parts.append("piecewise-smooth (C2 not satisfied)")
        return ", ".join(parts)


def verify_hypotheses(model: Incidence, box: tuple[float, float],
                      grid_n: int = 41) -> HypothesisReport:
    """Check positivity, monotonicity and per-virion decay on a sample grid.

    Args:
        model: Incidence model to audit.
        box: (T_max, V_max) of the sampled rectangle.
        grid_n: Nodes per axis (closed-form kinds); tabulated kinds use their
            own nodes inside the box.

    Returns:
        HypothesisReport with the first violating sample, if any.
    """
    T_max, V_max = float(box[0]), float(box[1])
    if not (T_max > 0 and V_max > 0):
        raise DomainError("hypothesis box must be positive")
    if grid_n < 2:
        raise DomainError("grid_n must be at least 2")

    if isinstance(model, TabulatedIncidence):
        Tg, Vg, _ = model._arr
        Ts = Tg[Tg <= T_max]
        Vs = Vg[Vg <= V_max]
    else:
        Ts = np.linspace(0.0, T_max, grid_n)
        Vs = np.linspace(0.0, V_max, grid_n)

    H = np.array([[model._rate(t, v) for v in Vs] for t in Ts])
    Hb = np.array([[model._hbar(t, v) for v in Vs] for t in Ts])
    violation = None
    notes = []

    def note(name, i, j):
        nonlocal violation
        if violation is None:
            violation = {"hypothesis": name, "T": float(Ts[i]), "V": float(Vs[j])}

    h1 = True
    for j in range(len(Vs)):
        if H[0, j] != 0.0:
            h1 = False
            note("H1", 0, j)
            break
    for i in range(len(Ts)):
        if H[i, 0] != 0.0:
            h1 = False
            note("H1", i, 0)
            break

    h2 = True
    inner = H[1:, 1:]
    dT = np.diff(inner, axis=0)
    dV = np.diff(inner, axis=1)
    if dT.size and np.any(dT <= 0):
        h2 = False
        i, j = np.argwhere(dT <= 0)[0]
        note("H2", i + 2, j + 1)
    if dV.size and np.any(dV <= 0):
        h2 = False
        i, j = np.argwhere(dV <= 0)[0]
        note("H2", i + 1, j + 2)

    dHb = np.diff(Hb, axis=1)
    tol = 1e-12 * max(float(np.max(np.abs(Hb))), 1e-300)
    h3_monotone = not np.any(dHb > tol)
    if not h3_monotone:
        i, j = np.argwhere(dHb > tol)[0]
        note("H3", i, j + 1)

    if isinstance(model, TabulatedIncidence):
        decay = "not-evaluable"
        notes.append("decay of hbar as V -> inf cannot be probed beyond the table")
    else:
        base = model._hbar(T_max, 0.0)
        probe = model._hbar(T_max, V_max * 1e12)
        decay = "decaying" if probe < 1e-3 * base else "non-decaying"
        if decay == "non-decaying":
            notes.append("hbar does not tend to 0; equilibrium existence needs a user bracket")
    if not model.smooth:
        notes.append("model is piecewise smooth; C2 regularity is not satisfied")
    return HypothesisReport(h1, h2, bool(h3_monotone), decay, model.smooth, violation, notes)
