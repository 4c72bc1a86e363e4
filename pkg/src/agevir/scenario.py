"""Scenario container, JSON schema and validation.

A scenario file is a JSON object::

    {
      "name": "...",
      "provenance": "free text",
      "globals": {"c": .., "q": .., "k": .., "h": .., "b": ..},
      "classes": [
        {"name": "T cells", "lambda": .., "d": ..,
         "incidence": {"kind": "saturated", "beta": .., "alpha": ..},
         "kernel": {"delta": {...}, "production": {...}}}
      ],
      "dde": {"omega": 0.5},                         (optional)
      "numerics": {"dtheta": 0.01, "dt": null, "theta_max": null,
                   "tolerances": {}},                  (optional)
      "initial": {"T": [..], "V": .., "A": ..,
                  "i0": [{"kind": "exponential", "amplitude": .., "rate": ..}],
                  "I": [..], "history": {"kind": "constant"}}  (optional)
    }

Validation errors name the offending field with a dotted path such as
``classes[0].d``.
"""

from __future__ import annotations

import copy
import json
import math
import re
import warnings
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any

import numpy as np

from agevir.errors import ValidationError
from agevir.incidence import Incidence, incidence_from_dict, verify_hypotheses
from agevir.kernels import AgeKernel, DelayedConstant


class HypothesisWarning(UserWarning):
    """An incidence model failed part of the sampled hypothesis audit."""


def _field(obj: dict, key: str, path: str, *, positive=True, allow_zero=False,
           default=None, required=True):
    if key not in obj:
        if required:
            raise ValidationError(f"{path}.{key}: missing required field")
        return default
    val = obj[key]
    if isinstance(val, bool) or not isinstance(val, (int, float)):
        raise ValidationError(f"{path}.{key}: expected a number, got {val!r}")
    val = float(val)
    if not math.isfinite(val):
        raise ValidationError(f"{path}.{key}: must be finite")
    if positive and not (val > 0 or (allow_zero and val == 0)):
        req = "non-negative" if allow_zero else "positive"
        raise ValidationError(f"{path}.{key}: must be {req}, got {val}")
    return val


# -- initial age profiles -------------------------------------------------------


@dataclass(frozen=True)
class AgeProfile:
    """Initial infected-age density i0(theta) of one class.

    ``kind`` is ``zero``, ``exponential`` (amplitude * exp(-rate*theta)) or
    ``tabulated`` (piecewise linear through ``ages``/``values``, zero beyond).
    """

    kind: str = "zero"
    amplitude: float = 0.0
    rate: float = 0.0
    ages: tuple[float, ...] = ()
    values: tuple[float, ...] = ()

    def density(self, theta):
        th = np.asarray(theta, dtype=float)
        if self.kind == "exponential":
            return self.amplitude * np.exp(-self.rate * th)
        if self.kind == "tabulated":
            return np.interp(th, self.ages, self.values, right=0.0)
        return np.zeros_like(th)

    def tail_mass(self, a: float) -> float:
        """int_a^inf i0."""
        if self.kind == "exponential":
            return self.amplitude * math.exp(-self.rate * a) / self.rate
        if self.kind == "tabulated":
            ages, vals = np.asarray(self.ages), np.asarray(self.values)
            if a >= ages[-1]:
                return 0.0
            x = np.concatenate([[a], ages[ages > a]])
            y = np.interp(x, ages, vals)
            return float(np.trapezoid(y, x))
        return 0.0

    @property
    def total(self) -> float:
        return self.tail_mass(0.0)

    @property
    def is_zero(self) -> bool:
        return self.kind == "zero" or (self.kind == "exponential" and self.amplitude == 0) or (
            self.kind == "tabulated" and max(self.values) == 0)

    def to_dict(self):
        if self.kind == "exponential":
            return {"kind": "exponential", "amplitude": self.amplitude, "rate": self.rate}
        if self.kind == "tabulated":
            return {"kind": "tabulated", "ages": list(self.ages), "values": list(self.values)}
        return {"kind": "zero"}

    @classmethod
    def from_dict(cls, spec: dict, path: str) -> "AgeProfile":
        kind = spec.get("kind")
        if kind == "zero":
            return cls()
        if kind == "exponential":
            return cls("exponential",
                       amplitude=_field(spec, "amplitude", path, allow_zero=True),
                       rate=_field(spec, "rate", path))
        if kind == "tabulated":
            ages = tuple(float(a) for a in spec.get("ages", ()))
            vals = tuple(float(v) for v in spec.get("values", ()))
            if len(ages) < 2 or len(ages) != len(vals):
                raise ValidationError(f"{path}: ages/values must match, length >= 2")
            if ages[0] != 0 or any(b <= a for a, b in zip(ages, ages[1:])):
                raise ValidationError(f"{path}.ages: must start at 0 and increase")
            if any(v < 0 or not math.isfinite(v) for v in vals):
                raise ValidationError(f"{path}.values: must be finite and non-negative")
            return cls("tabulated", ages=ages, values=vals)
        raise ValidationError(f"{path}.kind: unknown initial profile kind {kind!r}")


@dataclass(frozen=True)
class History:
    """DDE history of the infected totals I_j on [-omega, 0].

    ``constant`` extends I(0) backwards; ``tabulated`` interpolates the given
    samples; ``consistent`` derives the history from the initial age profile so
    the delayed system matches the age-structured one exactly.
    """

    kind: str = "constant"
    times: tuple[float, ...] = ()
    values: tuple[tuple[float, ...], ...] = ()

    def to_dict(self):
        if self.kind == "tabulated":
            return {"kind": "tabulated", "times": list(self.times),
                    "I": [list(v) for v in self.values]}
        return {"kind": self.kind}


@dataclass(frozen=True)
class InitialData:
    T: tuple[float, ...] | None = None
    V: float = 0.0
    A: float = 0.0
    i0: tuple[AgeProfile, ...] | None = None
    I: tuple[float, ...] | None = None
    history: History = field(default_factory=History)

    def to_dict(self):
        out: dict[str, Any] = {}
        if self.T is not None:
            out["T"] = list(self.T)
        out["V"] = self.V
        out["A"] = self.A
        if self.i0 is not None:
            out["i0"] = [p.to_dict() for p in self.i0]
        if self.I is not None:
            out["I"] = list(self.I)
        out["history"] = self.history.to_dict()
        return out


# -- the scenario -----------------------------------------------------------------


@dataclass(frozen=True)
class Globals:
    c: float
    q: float
    k: float
    h: float
    b: float


@dataclass(frozen=True)
class CellClass:
    name: str
    lam: float
    d: float
    incidence: Incidence
    kernel: AgeKernel

    @property
    def T0(self) -> float:
        return self.lam / self.d


@dataclass(frozen=True)
class Numerics:
    dtheta: float = 0.01
    dt: float | None = None
    theta_max: float | None = None
    tolerances: tuple[tuple[str, float], ...] = ()

    def tol(self, name: str, default: float) -> float:
        return dict(self.tolerances).get(name, default)


@dataclass(frozen=True)
class Scenario:
    name: str
    classes: tuple[CellClass, ...]
    globals: Globals
    omega: float | None = None
    numerics: Numerics = field(default_factory=Numerics)
    initial: InitialData = field(default_factory=InitialData)
    provenance: str = ""

    @property
    def n(self) -> int:
        return len(self.classes)

    @property
    def c(self):
        return self.globals.c

    @property
    def d_bar(self) -> float:
        """min over classes of d_j and the infected death-rate floor."""
        return min(min(cl.d for cl in self.classes),
                   min(cl.kernel.delta_min for cl in self.classes))

    @property
    def total_cell_bound(self) -> float:
        return sum(cl.lam for cl in self.classes) / self.d_bar

    @property
    def p_max(self) -> float:
        return max(cl.kernel.p_max for cl in self.classes)

    @property
    def virion_bound(self) -> float:
        """P_max * M / c; infinite when some production rate is unbounded."""
        return self.p_max * self.total_cell_bound / self.c

    @property
    def antibody_bound(self) -> float:
        g = self.globals
        return g.k * self.virion_bound / g.b

    @property
    def antibody_activation_load(self) -> float:
        """Viral load b*h/k at which antibodies start to expand."""
        g = self.globals
        return g.b * g.h / g.k

    def initial_T(self) -> tuple[float, ...]:
        if self.initial.T is not None:
            return self.initial.T
        return tuple(cl.T0 for cl in self.classes)

    def initial_profiles(self) -> tuple[AgeProfile, ...]:
        if self.initial.i0 is not None:
            return self.initial.i0
        return tuple(AgeProfile() for _ in self.classes)

    # serialisation
    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {"name": self.name}
        if self.provenance:
            out["provenance"] = self.provenance
        g = self.globals
        out["globals"] = {"c": g.c, "q": g.q, "k": g.k, "h": g.h, "b": g.b}
        out["classes"] = [
            {"name": cl.name, "lambda": cl.lam, "d": cl.d,
             "incidence": cl.incidence.to_dict(), "kernel": cl.kernel.to_dict()}
            for cl in self.classes]
        if self.omega is not None:
            out["dde"] = {"omega": self.omega}
        nm = self.numerics
        out["numerics"] = {"dtheta": nm.dtheta, "dt": nm.dt, "theta_max": nm.theta_max,
                           "tolerances": dict(nm.tolerances)}
        out["initial"] = self.initial.to_dict()
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_dict(cls, spec: dict[str, Any]) -> "Scenario":
        return _parse(spec)

    def replace_value(self, path: str, value: float) -> "Scenario":
        """Copy of the scenario with the scalar at ``path`` set to ``value``.

        ``dde.omega`` also moves the onset of every delayed-constant
        production kernel so the reducible shape is kept.
        """
        spec = self.to_dict()
        set_path(spec, path, value)
        if path == "dde.omega":
            for cl in spec["classes"]:
                prod = cl["kernel"]["production"]
                if prod.get("kind") == DelayedConstant.kind:
                    prod["omega"] = value
        return _parse(spec)


_TOKEN = re.compile(r"([A-Za-z_][A-Za-z0-9_]*)|\[(\d+)\]")


def _split_path(path: str) -> list[str | int]:
    parts: list[str | int] = []
    for chunk in path.split("."):
        pos = 0
        for m in _TOKEN.finditer(chunk):
            if m.start() != pos:
                raise ValidationError(f"bad parameter path {path!r}")
            parts.append(m.group(1) if m.group(1) else int(m.group(2)))
            pos = m.end()
        if pos != len(chunk) or not chunk:
            raise ValidationError(f"bad parameter path {path!r}")
    return parts


def get_path(spec: dict, path: str):
    node: Any = spec
    for p in _split_path(path):
        try:
            node = node[p]
        except (KeyError, IndexError, TypeError):
            raise ValidationError(f"parameter path {path!r} does not exist") from None
    return node


def set_path(spec: dict, path: str, value: float) -> None:
    parts = _split_path(path)
    current = get_path(spec, path)
    if isinstance(current, bool) or not isinstance(current, (int, float)):
        raise ValidationError(f"parameter path {path!r} does not address a scalar")
    node = spec
    for p in parts[:-1]:
        node = node[p]
    node[parts[-1]] = float(value)


def _parse(spec: dict[str, Any]) -> Scenario:
    if not isinstance(spec, dict):
        raise ValidationError("scenario must be a JSON object")
    name = str(spec.get("name", "unnamed"))
    prov = spec.get("provenance", "")
    if isinstance(prov, list):
        prov = "\n".join(map(str, prov))
    g = spec.get("globals")
    if not isinstance(g, dict):
        raise ValidationError("globals: missing or not an object")
    glob = Globals(*(_field(g, key, "globals") for key in ("c", "q", "k", "h", "b")))

    raw_classes = spec.get("classes")
    if not isinstance(raw_classes, list) or not raw_classes:
        raise ValidationError("classes: need a non-empty list")
    classes = []
    for j, cl in enumerate(raw_classes):
        path = f"classes[{j}]"
        if not isinstance(cl, dict):
            raise ValidationError(f"{path}: expected an object")
        lam = _field(cl, "lambda", path)
        d = _field(cl, "d", path)
        for sub in ("incidence", "kernel"):
            if not isinstance(cl.get(sub), dict):
                raise ValidationError(f"{path}.{sub}: missing or not an object")
        try:
            inc = incidence_from_dict(cl["incidence"])
        except ValidationError as exc:
            raise ValidationError(f"{path}.incidence: {exc}") from None
        try:
            ker = AgeKernel.from_dict(cl["kernel"])
        except ValidationError as exc:
            raise ValidationError(f"{path}.kernel: {exc}") from None
        classes.append(CellClass(str(cl.get("name", f"class {j + 1}")), lam, d, inc, ker))
    n = len(classes)

    omega = None
    if spec.get("dde") is not None:
        omega = _field(spec["dde"], "omega", "dde", allow_zero=True)

    nm = spec.get("numerics") or {}
    tol = nm.get("tolerances") or {}
    if not isinstance(tol, dict):
        raise ValidationError("numerics.tolerances: expected an object")
    numerics = Numerics(
        dtheta=_field(nm, "dtheta", "numerics", default=0.01, required=False),
        dt=(None if nm.get("dt") is None else _field(nm, "dt", "numerics")),
        theta_max=(None if nm.get("theta_max") is None
                   else _field(nm, "theta_max", "numerics")),
        tolerances=tuple(sorted((str(k), _field(tol, k, "numerics.tolerances"))
                                for k in tol)))

    initial = _parse_initial(spec.get("initial") or {}, n)
    return Scenario(name, tuple(classes), glob, omega, numerics, initial, str(prov))


def _vector(obj, key, n, path, allow_zero=True):
    val = obj.get(key)
    if val is None:
        return None
    if not isinstance(val, list) or len(val) != n:
        raise ValidationError(f"{path}.{key}: expected a list of {n} numbers")
    return tuple(_field({key: v}, key, f"{path}", allow_zero=allow_zero) for v in val)


def _parse_initial(ini: dict, n: int) -> InitialData:
    path = "initial"
    T = _vector(ini, "T", n, path)
    V = _field(ini, "V", path, allow_zero=True, default=0.0, required=False)
    A = _field(ini, "A", path, allow_zero=True, default=0.0, required=False)
    i0 = None
    if ini.get("i0") is not None:
        raw = ini["i0"]
        if not isinstance(raw, list) or len(raw) != n:
            raise ValidationError(f"{path}.i0: expected a list of {n} profiles")
        i0 = tuple(AgeProfile.from_dict(p, f"{path}.i0[{j}]") for j, p in enumerate(raw))
    I = _vector(ini, "I", n, path)
    hist = ini.get("history") or {"kind": "constant"}
    kind = hist.get("kind")
    if kind in ("constant", "consistent"):
        history = History(kind)
    elif kind == "tabulated":
        times = tuple(float(t) for t in hist.get("times", ()))
        vals = hist.get("I", ())
        if len(times) < 2 or any(b <= a for a, b in zip(times, times[1:])):
            raise ValidationError(f"{path}.history.times: need >= 2 increasing times")
        if times[-1] != 0.0:
            raise ValidationError(f"{path}.history.times: must end at 0")
        if len(vals) != n or any(len(v) != len(times) for v in vals):
            raise ValidationError(f"{path}.history.I: expected {n} series of len(times)")
        values = tuple(tuple(float(x) for x in v) for v in vals)
        if any(x < 0 or not math.isfinite(x) for v in values for x in v):
            raise ValidationError(f"{path}.history.I: must be finite and non-negative")
        history = History("tabulated", times, values)
    else:
        raise ValidationError(f"{path}.history.kind: unknown history kind {kind!r}")
    return InitialData(T, V, A, i0, I, history)


# -- loading ----------------------------------------------------------------------


def bundled_names() -> list[str]:
    root = resources.files("agevir") / "data"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".json"))


def _resolve(source: str | Path) -> tuple[str, str]:
    p = Path(source)
    if p.is_file():
        return str(p), p.read_text()
    name = p.name[:-5] if p.name.endswith(".json") else p.name
    res = resources.files("agevir") / "data" / f"{name}.json"
    if res.is_file():
        return f"bundled:{name}", res.read_text()
    raise ValidationError(f"scenario {str(source)!r} is neither a file nor a bundled name "
                          f"({', '.join(bundled_names())})")


def audit_incidence(scenario: Scenario, grid_n: int = 11) -> list[str]:
    """Run the hypothesis audit on each class; return human-readable problems."""
    problems = []
    vbox = scenario.virion_bound
    if not math.isfinite(vbox):
        vbox = 1e6
    for j, cl in enumerate(scenario.classes):
        rep = verify_hypotheses(cl.incidence, (cl.T0, max(vbox, 1.0)), grid_n=grid_n)
        if not rep.passed:
            problems.append(f"classes[{j}].incidence: {rep.summary()}")
    return problems


def load_scenario(source: str | Path, *, audit: bool = True) -> Scenario:
    """Load and validate a scenario from a path or a bundled name.

    Incidence models failing the hypothesis audit produce a
    :class:`HypothesisWarning`; malformed data raises ValidationError.
    """
    origin, text = _resolve(source)
    try:
        spec = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{origin}: invalid JSON ({exc})") from None
    scen = _parse(spec)
    if audit:
        for msg in audit_incidence(scen):
            warnings.warn(msg, HypothesisWarning, stacklevel=2)
    return scen


def save_scenario(scenario: Scenario, path: str | Path) -> None:
    Path(path).write_text(scenario.to_json() + "\n")


def scenario_copy(scenario: Scenario) -> Scenario:
    return _parse(copy.deepcopy(scenario.to_dict()))
