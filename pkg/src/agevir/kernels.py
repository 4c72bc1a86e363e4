"""Infection-age kernels: death rate delta(theta) and virion production P(theta).

An :class:`AgeKernel` pairs one death-rate model with one production model and
derives from them

* the survival probability ``sigma(theta) = exp(-int_0^theta delta)``,
* the burst size ``N = int_0^inf P sigma``,
* the remaining-production weight ``gamma(x) = int_x^inf P(theta)
  exp(-int_x^theta delta) dtheta``, and
* the renewal kernel ``k(theta) = P(theta) sigma(theta)``.

Two independent routes are provided for N and gamma.  When the death rate is
piecewise constant, every production family integrates against an exponential
in closed form (``exp_integral``), so the closed route is exact.  The quadrature
route is composite 32-node Gauss-Legendre between breakpoints, marching past
the last breakpoint until the remaining tail is below 1e-12 of the partial sum.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, ClassVar

import numpy as np

from agevir.errors import DomainError, ValidationError

LN10 = math.log(10.0)
_GL32 = np.polynomial.legendre.leggauss(32)
_GL8 = np.polynomial.legendre.leggauss(8)
TAIL_RTOL = 1e-12


def _pos(name, v, allow_zero=False):
    ok = math.isfinite(v) and (v >= 0 if allow_zero else v > 0)
    if not ok:
        req = "non-negative" if allow_zero else "positive"
        raise ValidationError(f"{name} must be {req} and finite, got {v}")
    return float(v)


def _neg_expm1_over(x, r):
    """(1 - exp(-r*x)) / r, stable for small r*x; x may be inf."""
    if math.isinf(x):
        return 1.0 / r
    if r == 0.0:
        return x
    return -math.expm1(-r * x) / r


# -- death rates --------------------------------------------------------------


class DeathRate:
    kind: ClassVar[str] = ""

    def rate(self, theta):
        raise NotImplementedError

    def hazard(self, theta):
        """Cumulative hazard int_0^theta delta, vectorised."""
        raise NotImplementedError

    @property
    def breakpoints(self) -> tuple[float, ...]:
        return ()

    @property
    def minimum(self) -> float:
        raise NotImplementedError

    @property
    def maximum(self) -> float:
        raise NotImplementedError

    @property
    def tail_rate(self) -> float:
        """Constant rate beyond the last breakpoint."""
        raise NotImplementedError

    def constant_pieces(self, x: float):
        """[(lo, hi, rate), ...] covering [x, inf), or None if not piecewise constant."""
        return None


@dataclass(frozen=True)
class ConstantDeath(DeathRate):
    delta_star: float
    kind: ClassVar[str] = "constant"

    def __post_init__(self):
        _pos("delta_star", self.delta_star)

    def rate(self, theta):
        return np.full_like(np.asarray(theta, dtype=float), self.delta_star)

    def hazard(self, theta):
        return self.delta_star * np.asarray(theta, dtype=float)

    minimum = maximum = tail_rate = property(lambda self: self.delta_star)

    def constant_pieces(self, x):
        return [(x, math.inf, self.delta_star)]

    def to_dict(self):
        return {"kind": self.kind, "delta_star": self.delta_star}


@dataclass(frozen=True)
class PiecewiseDeath(DeathRate):
    """Rate ``d`` before the switch age ``tau`` and ``delta_star`` after it."""

    d: float
    delta_star: float
    tau: float
    kind: ClassVar[str] = "piecewise"

    def __post_init__(self):
        _pos("d", self.d)
        _pos("delta_star", self.delta_star)
        _pos("tau", self.tau, allow_zero=True)

    def rate(self, theta):
        th = np.asarray(theta, dtype=float)
        return np.where(th < self.tau, self.d, self.delta_star)

    def hazard(self, theta):
        th = np.asarray(theta, dtype=float)
        return np.where(th < self.tau, self.d * th,
                        self.d * self.tau + self.delta_star * (th - self.tau))

    @property
    def breakpoints(self):
        return (self.tau,) if self.tau > 0 else ()

    minimum = property(lambda self: min(self.d, self.delta_star))
    maximum = property(lambda self: max(self.d, self.delta_star))
    tail_rate = property(lambda self: self.delta_star)

    def constant_pieces(self, x):
        if x >= self.tau:
            return [(x, math.inf, self.delta_star)]
        return [(x, self.tau, self.d), (self.tau, math.inf, self.delta_star)]

    def to_dict(self):
        return {"kind": self.kind, "d": self.d, "delta_star": self.delta_star,
                "tau": self.tau}


@dataclass(frozen=True)
class TabulatedDeath(DeathRate):
    """Piecewise-linear rate through (ages, rates); constant past the table."""

    ages: tuple[float, ...]
    rates: tuple[float, ...]
    kind: ClassVar[str] = "tabulated"
    _cum: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        a = np.asarray(self.ages, dtype=float)
        r = np.asarray(self.rates, dtype=float)
        _check_table(a, r, "death")
        if np.any(r <= 0):
            raise ValidationError("tabulated death rates must be positive")
        cum = np.concatenate([[0.0], np.cumsum(0.5 * (r[1:] + r[:-1]) * np.diff(a))])
        object.__setattr__(self, "_cum", cum)

    def rate(self, theta):
        a, r = np.asarray(self.ages), np.asarray(self.rates)
        return np.interp(np.asarray(theta, dtype=float), a, r)

    def hazard(self, theta):
        a = np.asarray(self.ages, dtype=float)
        r = np.asarray(self.rates, dtype=float)
        th = np.asarray(theta, dtype=float)
        i = np.clip(np.searchsorted(a, th, side="right") - 1, 0, len(a) - 1)
        u = th - a[i]
        slope = np.zeros_like(a)
        slope[:-1] = np.diff(r) / np.diff(a)
        return self._cum[i] + r[i] * u + 0.5 * slope[i] * u * u

    @property
    def breakpoints(self):
        return tuple(float(x) for x in self.ages[1:])

    minimum = property(lambda self: float(min(self.rates)))
    maximum = property(lambda self: float(max(self.rates)))
    tail_rate = property(lambda self: float(self.rates[-1]))

    def to_dict(self):
        return {"kind": self.kind, "ages": list(self.ages), "rates": list(self.rates)}


# -- production rates ---------------------------------------------------------


class ProductionRate:
    kind: ClassVar[str] = ""
    growth: float = 0.0  # exponential growth rate of P, per day

    def rate(self, theta):
        raise NotImplementedError

    @property
    def breakpoints(self) -> tuple[float, ...]:
        return ()

    @property
    def sup(self) -> float:
        raise NotImplementedError

    @property
    def support_end(self) -> float:
        return math.inf

    @property
    def constant_tail(self) -> bool:
        """True when P is exactly constant beyond its last breakpoint."""
        return True

    @property
    def is_zero(self) -> bool:
        return False

    def envelope(self, theta: float) -> float:
        """Upper bound of P on [theta, inf)."""
        return self.sup

    def exp_integral(self, a: float, b: float, r: float) -> float:
        """int_a^b P(theta) exp(-r (theta - a)) dtheta, b possibly inf."""
        raise NotImplementedError


@dataclass(frozen=True)
class ConstantProduction(ProductionRate):
    p_star: float
    kind: ClassVar[str] = "constant"

    def __post_init__(self):
        _pos("p_star", self.p_star, allow_zero=True)

    def rate(self, theta):
        return np.full_like(np.asarray(theta, dtype=float), self.p_star)

    sup = property(lambda self: self.p_star)
    is_zero = property(lambda self: self.p_star == 0.0)

    def exp_integral(self, a, b, r):
        return self.p_star * _neg_expm1_over(b - a, r) if b > a else 0.0

    def to_dict(self):
        return {"kind": self.kind, "p_star": self.p_star}


@dataclass(frozen=True)
class DelayedConstant(ProductionRate):
    """Zero before the onset age ``omega``, ``p_star`` after it."""

    p_star: float
    omega: float
    kind: ClassVar[str] = "delayed_constant"

    def __post_init__(self):
        _pos("p_star", self.p_star, allow_zero=True)
        _pos("omega", self.omega, allow_zero=True)

    def rate(self, theta):
        th = np.asarray(theta, dtype=float)
        return np.where(th < self.omega, 0.0, self.p_star)

    breakpoints = property(lambda self: (self.omega,) if self.omega > 0 else ())
    sup = property(lambda self: self.p_star)
    is_zero = property(lambda self: self.p_star == 0.0)

    def exp_integral(self, a, b, r):
        lo = max(a, self.omega)
        if lo >= b:
            return 0.0
        return math.exp(-r * (lo - a)) * self.p_star * _neg_expm1_over(b - lo, r)

    def to_dict(self):
        return {"kind": self.kind, "p_star": self.p_star, "omega": self.omega}


@dataclass(frozen=True)
class DelayedSaturating(ProductionRate):
    """``p_star * (1 - exp(-r (theta - theta1)))`` after ``theta1``, else 0."""

    p_star: float
    r: float
    theta1: float
    kind: ClassVar[str] = "delayed_saturating"

    def __post_init__(self):
        _pos("p_star", self.p_star, allow_zero=True)
        _pos("r", self.r)
        _pos("theta1", self.theta1, allow_zero=True)

    def rate(self, theta):
        th = np.asarray(theta, dtype=float)
        return np.where(th < self.theta1, 0.0,
                        -self.p_star * np.expm1(-self.r * np.maximum(th - self.theta1, 0.0)))

    breakpoints = property(lambda self: (self.theta1,) if self.theta1 > 0 else ())
    sup = property(lambda self: self.p_star)
    constant_tail = property(lambda self: False)
    is_zero = property(lambda self: self.p_star == 0.0)

    def exp_integral(self, a, b, r):
        lo = max(a, self.theta1)
        if lo >= b:
            return 0.0
        length = b - lo
        head = math.exp(-r * (lo - a))
        lag = math.exp(-self.r * (lo - self.theta1))
        return self.p_star * head * (_neg_expm1_over(length, r)
                                     - lag * _neg_expm1_over(length, r + self.r))

    def to_dict(self):
        return {"kind": self.kind, "p_star": self.p_star, "r": self.r,
                "theta1": self.theta1}


@dataclass(frozen=True)
class ExponentialGrowth(ProductionRate):
    """``base + amplitude * 10**(exponent * theta)``.

    Unbounded for ``exponent > 0``; the burst size stays finite only while the
    death rate in the tail exceeds ``exponent * ln 10``.
    """

    base: float
    amplitude: float
    exponent: float
    kind: ClassVar[str] = "exponential_growth"

    def __post_init__(self):
        _pos("base", self.base, allow_zero=True)
        _pos("amplitude", self.amplitude, allow_zero=True)
        if not math.isfinite(self.exponent):
            raise ValidationError("exponent must be finite")

    @property
    def growth(self):
        return max(self.exponent, 0.0) * LN10

    def rate(self, theta):
        th = np.asarray(theta, dtype=float)
        return self.base + self.amplitude * np.power(10.0, self.exponent * th)

    @property
    def sup(self):
        if self.exponent > 0 and self.amplitude > 0:
            return math.inf
        return self.base + self.amplitude

    constant_tail = property(lambda self: self.exponent == 0 or self.amplitude == 0)
    is_zero = property(lambda self: self.base == 0 and self.amplitude == 0)

    def envelope(self, theta):
        if self.exponent > 0:
            return float(self.rate(theta))
        return self.base + self.amplitude * 10.0 ** (self.exponent * theta)

    def exp_integral(self, a, b, r):
        if b <= a:
            return 0.0
        g = self.exponent * LN10
        if math.isinf(b) and r <= g:
            raise ValidationError("exponential production outgrows the death rate")
        part = self.amplitude * math.exp(g * a) * _neg_expm1_over(b - a, r - g)
        return self.base * _neg_expm1_over(b - a, r) + part

    def to_dict(self):
        return {"kind": self.kind, "base": self.base, "amplitude": self.amplitude,
                "exponent": self.exponent}


@dataclass(frozen=True)
class TabulatedProduction(ProductionRate):
    """Piecewise-linear production through (ages, rates); zero past the table."""

    ages: tuple[float, ...]
    rates: tuple[float, ...]
    kind: ClassVar[str] = "tabulated"

    def __post_init__(self):
        a = np.asarray(self.ages, dtype=float)
        r = np.asarray(self.rates, dtype=float)
        _check_table(a, r, "production")
        if np.any(r < 0):
            raise ValidationError("tabulated production rates must be non-negative")

    def rate(self, theta):
        return np.interp(np.asarray(theta, dtype=float), self.ages, self.rates,
                         right=0.0)

    breakpoints = property(lambda self: tuple(float(x) for x in self.ages[1:]))
    sup = property(lambda self: float(max(self.rates)))
    support_end = property(lambda self: float(self.ages[-1]))
    is_zero = property(lambda self: max(self.rates) == 0.0)

    def exp_integral(self, a, b, r):
        ages, rates = self.ages, self.rates
        total = 0.0
        for i in range(len(ages) - 1):
            u0, u1 = max(ages[i], a), min(ages[i + 1], b)
            if u1 <= u0:
                continue
            slope = (rates[i + 1] - rates[i]) / (ages[i + 1] - ages[i])
            p0 = rates[i] + slope * (u0 - ages[i])
            e0 = math.exp(-r * (u0 - a))
            span = _neg_expm1_over(u1 - u0, r)  # int_u0^u1 e^{-r(s-u0)} ds
            moment = (span - (u1 - u0) * math.exp(-r * (u1 - u0))) / r
            total += e0 * (p0 * span + slope * moment)
        return total

    def to_dict(self):
        return {"kind": self.kind, "ages": list(self.ages), "rates": list(self.rates)}


def _check_table(a, r, what):
    if a.ndim != 1 or a.shape != r.shape or len(a) < 2:
        raise ValidationError(f"tabulated {what} needs matching ages/rates of length >= 2")
    if a[0] != 0.0 or np.any(np.diff(a) <= 0):
        raise ValidationError(f"tabulated {what} ages must start at 0 and increase")
    if not np.all(np.isfinite(r)):
        raise ValidationError(f"tabulated {what} rates must be finite")


_DEATH = {c.kind: c for c in (ConstantDeath, PiecewiseDeath)}
_PROD = {c.kind: c for c in (ConstantProduction, DelayedConstant, DelayedSaturating,
                             ExponentialGrowth)}


def death_from_dict(spec: dict[str, Any]) -> DeathRate:
    spec = dict(spec)
    kind = spec.pop("kind", None)
    if kind == "tabulated":
        return TabulatedDeath(tuple(map(float, spec["ages"])), tuple(map(float, spec["rates"])))
    if kind not in _DEATH:
        raise ValidationError(f"unknown death-rate kind {kind!r}")
    try:
        return _DEATH[kind](**{k: float(v) for k, v in spec.items()})
    except TypeError as exc:
        raise ValidationError(f"bad fields for {kind} death rate: {exc}") from None


def production_from_dict(spec: dict[str, Any]) -> ProductionRate:
    spec = dict(spec)
    kind = spec.pop("kind", None)
    if kind == "tabulated":
        return TabulatedProduction(tuple(map(float, spec["ages"])),
                                   tuple(map(float, spec["rates"])))
    if kind not in _PROD:
        raise ValidationError(f"unknown production kind {kind!r}")
    try:
        return _PROD[kind](**{k: float(v) for k, v in spec.items()})
    except TypeError as exc:
        raise ValidationError(f"bad fields for {kind} production: {exc}") from None


# -- the kernel pair ------------------------------------------------------------


@dataclass(frozen=True)
class AgeKernel:
    """Death and production kernels of one target-cell class.

    The burst size is computed once at construction; a kernel whose tail
    integral diverges is rejected.
    """

    death: DeathRate
    production: ProductionRate
    _n: float = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.death.minimum <= 0:
            raise ValidationError("death rate must stay above a positive minimum")
        if self.production.growth >= self.death.tail_rate:
            raise ValidationError(
                "divergent tail: production grows at rate "
                f"{self.production.growth:.6g}/day, faster than the tail death rate "
                f"{self.death.tail_rate:.6g}/day")
        closed = self.burst_size_closed_form()
        n = closed if closed is not None else self.burst_size_quadrature()
        if not math.isfinite(n):
            raise ValidationError("burst size integral does not converge")
        object.__setattr__(self, "_n", n)

    @classmethod
    def from_dict(cls, spec: dict[str, Any]) -> "AgeKernel":
        try:
            return cls(death_from_dict(spec["delta"]), production_from_dict(spec["production"]))
        except KeyError as exc:
            raise ValidationError(f"kernel missing field {exc}") from None

    def to_dict(self):
        return {"delta": self.death.to_dict(), "production": self.production.to_dict()}

    # derived scalars
    @property
    def delta_min(self) -> float:
        return self.death.minimum

    @property
    def p_max(self) -> float:
        return self.production.sup

    @property
    def burst_size(self) -> float:
        return self._n

    @property
    def breakpoints(self) -> tuple[float, ...]:
        return tuple(sorted(set(self.death.breakpoints) | set(self.production.breakpoints)))

    @property
    def last_breakpoint(self) -> float:
        bps = self.breakpoints
        return bps[-1] if bps else 0.0

    @property
    def lumpable(self) -> bool:
        """Death and production both constant past the last breakpoint."""
        return self.production.constant_tail

    # pointwise functions
    def survival(self, theta):
        return np.exp(-self.death.hazard(theta))

    def production_kernel(self, theta):
        return self.production.rate(theta) * self.survival(theta)

    def gamma(self, x: float) -> float:
        if x == 0.0:
            return self._n
        closed = self.gamma_closed_form(x)
        return closed if closed is not None else self.gamma_quadrature(x)

    # closed-form route
    def gamma_closed_form(self, x: float) -> float | None:
        pieces = self.death.constant_pieces(x)
        if pieces is None:
            return None
        total, acc = 0.0, 0.0
        for lo, hi, rate in pieces:
            total += math.exp(-acc) * self.production.exp_integral(lo, hi, rate)
            if math.isinf(hi):
                break
            acc += rate * (hi - lo)
        return total

    def burst_size_closed_form(self) -> float | None:
        return self.gamma_closed_form(0.0)

    # quadrature route
    def _piece_length(self) -> float:
        rates = [self.death.maximum, self.production.growth,
                 getattr(self.production, "r", 0.0), 1e-3]
        return min(1.0 / max(rates), 200.0)

    def gamma_quadrature(self, x: float) -> float:
        """gamma(x) by composite Gauss-Legendre, independent of exp_integral."""
        hx = float(self.death.hazard(x))
        prod = self.production

        def integrand(th):
            return prod.rate(th) * np.exp(-(self.death.hazard(th) - hx))

        return _march(integrand, x, self.breakpoints, self._piece_length(),
                      self._tail_bound_factory(x, hx))

    def burst_size_quadrature(self) -> float:
        return self.gamma_quadrature(0.0)

    @property
    def mean_lifetime(self) -> float:
        """int_0^inf sigma, the expected infected lifetime."""
        return AgeKernel(self.death, ConstantProduction(1.0)).burst_size

    def _tail_bound_factory(self, x, hx):
        prod, death = self.production, self.death
        dtail = death.tail_rate
        end = prod.support_end

        def bound(theta):
            if theta >= end:
                return 0.0
            surv = math.exp(-(float(death.hazard(theta)) - hx))
            return prod.envelope(theta) * surv / (dtail - prod.growth)
        return bound

    # grid support for the age-structured integrator
    def cell_integrals(self, edges: np.ndarray):
        """Per-cell integrals of sigma, P*sigma and (theta - left)*P*sigma.

        Cells are split at kernel breakpoints and each piece gets 8-point
        Gauss-Legendre, so the integrals are exact to roundoff for the smooth
        pieces the built-in families produce.
        """
        edges = np.asarray(edges, dtype=float)
        bps = np.array([b for b in self.breakpoints if edges[0] < b < edges[-1]])
        pts = np.union1d(edges, bps)
        lo, hi = pts[:-1], pts[1:]
        cell = np.searchsorted(edges, lo, side="right") - 1
        xg, wg = _GL8
        mid, half = 0.5 * (lo + hi), 0.5 * (hi - lo)
        th = mid[:, None] + half[:, None] * xg[None, :]
        w = half[:, None] * wg[None, :]
        sig = self.survival(th)
        k = self.production.rate(th) * sig
        ncell = len(edges) - 1
        S = np.bincount(cell, weights=(w * sig).sum(axis=1), minlength=ncell)
        K = np.bincount(cell, weights=(w * k).sum(axis=1), minlength=ncell)
        left = edges[cell][:, None]
        M = np.bincount(cell, weights=(w * (th - left) * k).sum(axis=1), minlength=ncell)
        return S, K, M

    def tail_integrals(self, a: float):
        """(int sigma, int P sigma, int gamma sigma) over [a, inf).

        Requires ``a`` at or past every death breakpoint.
        """
        if self.death.breakpoints and a < max(self.death.breakpoints):
            raise DomainError("tail must start beyond the death-rate breakpoints")
        dtail = self.death.tail_rate
        sa = float(self.survival(a))
        S = sa / dtail
        K = sa * self.production.exp_integral(a, math.inf, dtail)
        # int_a^inf Gamma = int_0^inf u * P(a+u) e^{-dtail u} du * sigma(a)
        prod = self.production

        def integrand(th):
            return (th - a) * prod.rate(th) * np.exp(-dtail * (th - a))

        def bound(theta):
            if theta >= prod.support_end:
                return 0.0
            rate = dtail - prod.growth
            u = theta - a
            return prod.envelope(theta) * math.exp(-dtail * u) * (u / rate + 1 / rate ** 2)

        pbps = tuple(b for b in prod.breakpoints if b > a)
        G = sa * _march(integrand, a, pbps, self._piece_length(), bound)
        return S, K, G

    def theta_tail(self, c: float, rtol: float = 1e-10) -> float:
        """Smallest age past the breakpoints with P*sigma/delta_min < rtol*c."""
        start = self.last_breakpoint
        target = rtol * c

        def env(theta):
            if theta >= self.production.support_end:
                return 0.0
            return (self.production.envelope(theta) * float(self.survival(theta))
                    / self.delta_min)

        if env(start) < target:
            return start
        hi = max(start, 1.0)
        while env(hi) >= target:
            hi *= 2.0
            if hi > 1e7:
                raise ValidationError("kernel tail does not decay")
        lo = start
        for _ in range(80):
            midp = 0.5 * (lo + hi)
            if env(midp) >= target:
                lo = midp
            else:
                hi = midp
        return hi


def _march(integrand, start, breakpoints, piece, tail_bound, chunk=64):
    """Composite GL32 from ``start`` to infinity.

    Breakpoint segments are subdivided into pieces of at most ``piece``; past
    the last breakpoint the march proceeds in chunks until ``tail_bound`` of
    the remaining integral drops below TAIL_RTOL of the partial sum, and that
    bound is then added as the tail estimate.
    """
    xg, wg = _GL32
    edges = [start]
    for b in sorted(breakpoints):
        if b <= edges[-1]:
            continue
        n = max(1, math.ceil((b - edges[-1]) / piece))
        edges.extend(np.linspace(edges[-1], b, n + 1)[1:].tolist())

    def integrate(e):
        e = np.asarray(e)
        lo, hi = e[:-1], e[1:]
        mid, half = 0.5 * (lo + hi), 0.5 * (hi - lo)
        th = mid[:, None] + half[:, None] * xg[None, :]
        return float(np.sum(half[:, None] * wg[None, :] * integrand(th)))

    total = integrate(edges) if len(edges) > 1 else 0.0
    pos = edges[-1]
    for _ in range(10000):
        rem = tail_bound(pos)
        if rem == 0.0 or rem <= TAIL_RTOL * abs(total):
            return total + rem
        nxt = pos + piece * np.arange(chunk + 1)
        total += integrate(nxt)
        pos = float(nxt[-1])
    raise ValidationError("quadrature tail did not converge")


# -- operation-level wrappers ----------------------------------------------------


def _check_age(theta):
    th = np.asarray(theta, dtype=float)
    if not np.all(np.isfinite(th)) or np.any(th < 0):
        raise DomainError(f"infection age must be finite and non-negative, got {theta}")
    return th


def survival(kernel: AgeKernel, theta):
    """Probability that a cell infected at age 0 is still alive at ``theta``."""
    th = _check_age(theta)
    out = kernel.survival(th)
    return float(out) if np.ndim(out) == 0 else out


def burst_size(kernel: AgeKernel) -> float:
    """Total virions released by one infected cell over its lifetime."""
    return kernel.burst_size


def gamma_weight(kernel: AgeKernel, x: float) -> float:
    """Expected remaining virion output of a cell that has reached age ``x``."""
    _check_age(x)
    return kernel.gamma(float(x))


def production_kernel(kernel: AgeKernel, theta):
    """Renewal kernel k(theta) = P(theta) sigma(theta)."""
    th = _check_age(theta)
    out = kernel.production_kernel(th)
    return float(out) if np.ndim(out) == 0 else out
