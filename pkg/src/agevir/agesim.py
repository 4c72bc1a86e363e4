"""Age-structured simulation by integration along characteristics.

Time and age advance in lockstep (dt = dtheta), so every cohort of infected
cells moves exactly one age cell per step.  Within a cohort the density is
``i(theta, t) = b * sigma(theta)`` with a constant *reduced density* ``b``; the
transport equation is therefore solved exactly and only the coupling of
(T, V, A) to the boundary is discretised.

Age cells are ``[k dtheta, (k+1) dtheta]`` for ``k < K``.  Every kernel-weighted
integral a cohort contributes to is precomputed per cell:

* ``S_k = int sigma``         (mass per unit reduced density),
* ``K_k = int P sigma``       (virion production),
* ``G_k = int gamma sigma``   (remaining production, for the functionals).

Cohorts older than ``theta_max = K dtheta`` are lumped into one tail
compartment per class.  Beyond the last death-rate breakpoint the death rate
is constant, so the tail mass evolves exactly; its production uses the mean
rate ``K_tail / S_tail``, which is exact when P is also constant there.

(T, V, A) advance with Heun's method.  The newborn cohort gets the average of
the boundary rate at both step ends.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from agevir.errors import DomainError, IntegrationError
from agevir.kernels import AgeKernel
from agevir.scenario import AgeProfile, Scenario
from agevir.trajectory import TrajectoryRecord

log = logging.getLogger(__name__)

_GL8 = np.polynomial.legendre.leggauss(8)
TAIL_RTOL = 1e-10
LUMP_HORIZON = 100.0
UNDERSHOOT_RTOL = 1e-12
OMEGA_SLACK = 1e-6


# -- grid ---------------------------------------------------------------------


def _cell_quad(fn, edges, breakpoints=()):
    """int over each cell of fn, 8-point GL on pieces split at breakpoints."""
    bps = np.array([b for b in breakpoints if edges[0] < b < edges[-1]])
    pts = np.union1d(edges, bps)
    lo, hi = pts[:-1], pts[1:]
    cell = np.searchsorted(edges, lo, side="right") - 1
    xg, wg = _GL8
    mid, half = 0.5 * (lo + hi), 0.5 * (hi - lo)
    th = mid[:, None] + half[:, None] * xg[None, :]
    vals = (half[:, None] * wg[None, :] * fn(th)).sum(axis=1)
    return np.bincount(cell, weights=vals, minlength=len(edges) - 1)


def default_theta_max(scenario: Scenario, dtheta: float) -> float:
    """Truncation age from the tail rule P sigma / delta_min < 1e-10 c.

    Kernels with constant death and production past their last breakpoint are
    carried exactly by the tail compartment, so for them the age is capped at
    ``max(last breakpoint + 1, 100)`` days.
    """
    out = 0.0
    for cl in scenario.classes:
        ker = cl.kernel
        theta = ker.theta_tail(scenario.c, TAIL_RTOL)
        if ker.lumpable:
            theta = min(theta, max(ker.last_breakpoint + 1.0, LUMP_HORIZON))
        out = max(out, theta, ker.last_breakpoint + dtheta)
    return out


@dataclass(frozen=True)
class AgeGrid:
    """Per-class cell weights on a uniform age grid."""

    dtheta: float
    K: int
    S: np.ndarray       # (n, K) int sigma per cell
    P: np.ndarray       # (n, K) int P sigma per cell
    G: np.ndarray       # (n, K) int gamma sigma per cell
    mid_sigma: np.ndarray  # (n, K) sigma at cell midpoints
    S_next: np.ndarray  # (n,) int sigma over the first tail cell
    decay: np.ndarray   # (n,) exp(-delta_tail dtheta)
    tail_S: np.ndarray  # (n,) int sigma beyond theta_max
    tail_P: np.ndarray
    tail_G: np.ndarray

    @property
    def theta_max(self) -> float:
        return self.K * self.dtheta

    @property
    def midpoints(self) -> np.ndarray:
        return (np.arange(self.K) + 0.5) * self.dtheta

    @property
    def tail_rate(self) -> np.ndarray:
        """Production per unit tail mass."""
        return self.tail_P / np.where(self.tail_S > 0, self.tail_S, 1.0)

    @property
    def tail_gamma(self) -> np.ndarray:
        return self.tail_G / np.where(self.tail_S > 0, self.tail_S, 1.0)


def _kernel_weights(ker: AgeKernel, dtheta: float, K: int):
    edges = dtheta * np.arange(K + 1)
    S, P, M = ker.cell_integrals(edges)
    tail_S, tail_P, tail_G = ker.tail_integrals(edges[-1])
    # Gamma(theta) = int_theta^inf P sigma, accumulated from the tail inwards
    gamma_right = tail_P + np.concatenate([np.cumsum(P[::-1])[::-1][1:], [0.0]])
    G = dtheta * gamma_right + M
    mid_sigma = ker.survival((np.arange(K) + 0.5) * dtheta)
    dtail = ker.death.tail_rate
    sig_K = float(ker.survival(edges[-1]))
    S_next = sig_K * -math.expm1(-dtail * dtheta) / dtail
    return S, P, G, mid_sigma, S_next, math.exp(-dtail * dtheta), tail_S, tail_P, tail_G


def build_grid(scenario: Scenario, dtheta: float | None = None,
               theta_max: float | None = None) -> AgeGrid:
    dtheta = float(dtheta or scenario.numerics.dtheta)
    if not dtheta > 0:
        raise DomainError("dtheta must be positive")
    theta_max = theta_max or scenario.numerics.theta_max or default_theta_max(scenario, dtheta)
    death_bp = max((max(cl.kernel.death.breakpoints, default=0.0)
                    for cl in scenario.classes), default=0.0)
    theta_max = max(theta_max, death_bp)
    K = max(1, int(math.ceil(theta_max / dtheta - 1e-9)))
    parts = [_kernel_weights(cl.kernel, dtheta, K) for cl in scenario.classes]
    stack = lambda i: np.array([p[i] for p in parts])  # noqa: E731
    return AgeGrid(dtheta, K, stack(0), stack(1), stack(2), stack(3), stack(4), stack(5),
                   stack(6), stack(7), stack(8))


# -- state ---------------------------------------------------------------------


@dataclass
class SystemState:
    """Snapshot of the full system.

    ``cohorts[j, k]`` is the reduced density of the class-j cohort in age cell
    k, so the density there is ``cohorts[j, k] * sigma_j(theta)``; ``tail``
    holds the infected mass older than ``theta_max``.
    """

    t: float
    T: np.ndarray
    V: float
    A: float
    cohorts: np.ndarray
    tail: np.ndarray
    grid: AgeGrid = field(repr=False)

    @property
    def age_grid(self) -> np.ndarray:
        return self.grid.midpoints

    def density(self) -> np.ndarray:
        """(n, K) infected density at the cell midpoints."""
        return self.cohorts * self.grid.mid_sigma

    def cell_mass(self) -> np.ndarray:
        return self.cohorts * self.grid.S

    @property
    def I(self) -> np.ndarray:
        return self.cell_mass().sum(axis=1) + self.tail

    def copy(self) -> "SystemState":
        return SystemState(self.t, self.T.copy(), self.V, self.A, self.cohorts.copy(),
                           self.tail.copy(), self.grid)


def state_from_steady(scenario: Scenario, steady, grid: AgeGrid, t: float = 0.0) -> SystemState:
    """Grid state of a steady state: every cohort carries the boundary rate."""
    b = np.array(steady.boundary, dtype=float)
    cohorts = np.repeat(b[:, None], grid.K, axis=1)
    return SystemState(t, np.array(steady.T, dtype=float), float(steady.V), float(steady.A),
                       cohorts, b * grid.tail_S, grid)


def init_state(scenario: Scenario, grid: AgeGrid | None = None, *, T=None, V=None, A=None,
               profiles: tuple[AgeProfile, ...] | None = None) -> SystemState:
    """Initial state from the scenario's initial block, with optional overrides.

    Cell masses of i0 are integrated exactly (8-point GL per cell) and stored as
    reduced densities.  Mass older than ``theta_max`` goes to the tail
    compartment with a logged warning.
    """
    grid = grid or build_grid(scenario)
    ini = scenario.initial
    T = np.array(T if T is not None else scenario.initial_T(), dtype=float)
    V = float(ini.V if V is None else V)
    A = float(ini.A if A is None else A)
    profiles = profiles or scenario.initial_profiles()
    if np.any(~np.isfinite(T)) or np.any(T < 0) or not (V >= 0 and A >= 0):
        raise DomainError("initial T, V, A must be finite and non-negative")
    if len(T) != scenario.n or len(profiles) != scenario.n:
        raise DomainError(f"initial data must have {scenario.n} classes")
    edges = grid.dtheta * np.arange(grid.K + 1)
    cohorts = np.zeros((scenario.n, grid.K))
    tail = np.zeros(scenario.n)
    for j, prof in enumerate(profiles):
        if prof.is_zero:
            continue
        mass = _cell_quad(prof.density, edges, prof.ages)
        S = grid.S[j]
        cohorts[j] = np.divide(mass, S, out=np.zeros_like(mass), where=S > 0)
        tail[j] = prof.tail_mass(grid.theta_max)
        if tail[j] > 1e-12 * prof.total:
            log.warning("class %d: initial mass %.3g beyond theta_max=%.4g moved to the "
                        "tail compartment", j + 1, tail[j], grid.theta_max)
    return SystemState(0.0, T, V, A, cohorts, tail, grid)


def omega_flags(scenario: Scenario, state: SystemState, slack: float = OMEGA_SLACK) -> dict:
    """Membership of each bound of the invariant region, with relative slack."""
    M = scenario.total_cell_bound
    I = state.I
    up = 1.0 + slack
    return {
        "T": bool(all(state.T[j] <= cl.T0 * up for j, cl in enumerate(scenario.classes))),
        "cells": bool(float(np.sum(state.T) + np.sum(I)) <= M * up),
        "V": bool(state.V <= scenario.virion_bound * up),
        "A": bool(state.A <= scenario.antibody_bound * up),
    }


# -- integrator --------------------------------------------------------------------


class AgeIntegrator:
    """Heun stepping of (T, V, A) with exact cohort transport.

    Cohorts sit in a ring buffer; cell k lives at physical column
    ``(head + k) % K``.  Cell weights are stored twice so the weights aligned
    with the ring are the contiguous slice ``[K - head, 2K - head)``.
    """

    def __init__(self, scenario: Scenario, state: SystemState):
        self.sc = scenario
        self.grid = g = state.grid
        self.K = g.K
        self.dt = g.dtheta
        self.n = scenario.n
        self.head = 0
        self.buf = state.cohorts.copy()
        self.tail = state.tail.copy()
        self.Pd = np.concatenate([g.P, g.P], axis=1)
        self.t = state.t
        self.T = [float(x) for x in state.T]
        self.V, self.A = float(state.V), float(state.A)
        self.inc = [cl.incidence for cl in scenario.classes]
        self.lam = [cl.lam for cl in scenario.classes]
        self.d = [cl.d for cl in scenario.classes]
        self.tail_rate = g.tail_rate
        self.h = [self.inc[j]._rate(self.T[j], self.V) for j in range(self.n)]
        self.scale_T = [max(x, cl.T0) for x, cl in zip(self.T, scenario.classes)]
        self.scale_V = max(self.V, 1e-300)
        self.scale_A = max(self.A, 1e-300)
        self.clamped = 0
        self.steps = 0

    def production(self) -> float:
        K, head = self.K, self.head
        total = 0.0
        for j in range(self.n):
            w = self.Pd[j, K - head:2 * K - head]
            total += float(self.buf[j] @ w) + self.tail_rate[j] * self.tail[j]
        return total

    def _rhs(self, T, V, A, h, prod):
        g = self.sc.globals
        fT = [self.lam[j] - self.d[j] * T[j] - h[j] for j in range(self.n)]
        fV = prod - g.c * V - g.q * A * V
        fA = g.k * A * V / (g.h + A) - g.b * A
        return fT, fV, fA

    def _guard(self, name, value, scale):
        if not math.isfinite(value):
            raise IntegrationError(f"{name} became non-finite at t={self.t:.6g}")
        if value < 0:
            if value < -UNDERSHOOT_RTOL * scale:
                raise IntegrationError(
                    f"{name} undershoot {value:.3g} at t={self.t:.6g} exceeds roundoff")
            self.clamped += 1
            return 0.0
        return value

    def _advance(self, T, V, A, fT, fV, fA, dt):
        Tn = [self._guard(f"T_{j + 1}", T[j] + dt * fT[j], self.scale_T[j])
              for j in range(self.n)]
        Vn = self._guard("V", V + dt * fV, self.scale_V)
        An = self._guard("A", A + dt * fA, self.scale_A)
        return Tn, Vn, An

    def step(self):
        dt, K = self.dt, self.K
        T, V, A, h = self.T, self.V, self.A, self.h
        fT, fV, fA = self._rhs(T, V, A, h, self.production())
        Tp, Vp, Ap = self._advance(T, V, A, fT, fV, fA, dt)
        hp = [self.inc[j]._rate(Tp[j], Vp) for j in range(self.n)]

        self.head = (self.head - 1) % K
        col = self.head
        leaving = self.buf[:, col].copy()
        self.tail = self.tail * self.grid.decay + leaving * self.grid.S_next
        self.buf[:, col] = 0.5 * (np.asarray(h) + np.asarray(hp))

        gT, gV, gA = self._rhs(Tp, Vp, Ap, hp, self.production())
        half = 0.5 * dt
        Tn, Vn, An = self._advance(T, V, A, [a + b for a, b in zip(fT, gT)],
                                   fV + gV, fA + gA, half)
        hn = [self.inc[j]._rate(Tn[j], Vn) for j in range(self.n)]
        self.buf[:, col] = 0.5 * (np.asarray(h) + np.asarray(hn))

        self.T, self.V, self.A, self.h = Tn, Vn, An, hn
        self.scale_T = [max(s, x) for s, x in zip(self.scale_T, Tn)]
        self.scale_V = max(self.scale_V, Vn)
        self.scale_A = max(self.scale_A, An)
        self.steps += 1
        self.t = self.t + dt

    def cohorts(self) -> np.ndarray:
        return np.roll(self.buf, -self.head, axis=1)

    def snapshot(self) -> SystemState:
        return SystemState(self.t, np.array(self.T), self.V, self.A, self.cohorts(),
                           self.tail.copy(), self.grid)


def step(scenario: Scenario, state: SystemState) -> SystemState:
    """One lockstep update dt = dtheta; returns a new state."""
    integ = AgeIntegrator(scenario, state)
    integ.step()
    return integ.snapshot()


def viral_production(state: SystemState) -> float:
    """sum_j int P_j i_j over the grid plus the tail compartment."""
    g = state.grid
    return float(np.sum(state.cohorts * g.P) + np.sum(g.tail_rate * state.tail))


# -- driver ------------------------------------------------------------------------


def simulate(scenario: Scenario, horizon: float, *, stride: float = 1.0,
             dtheta: float | None = None, theta_max: float | None = None,
             state: SystemState | None = None, diagnostics=(),
             slice_times=(), monitor_omega: bool = True) -> TrajectoryRecord:
    """Integrate the age-structured system over ``[t0, t0 + horizon]``.

    Args:
        scenario: Model and initial data.
        horizon: Length of the run in days.
        stride: Sampling interval, rounded to a whole number of steps.
        dtheta: Age and time step; defaults to the scenario numerics.
        theta_max: Age truncation; defaults to the tail rule.
        state: Starting state, otherwise built by :func:`init_state`.
        diagnostics: Any of ``"W"``, ``"W1"``, ``"W2"``, ``"phi"``.
        slice_times: Times at which full age profiles are stored.
        monitor_omega: Record invariant-region membership per sample.

    Returns:
        TrajectoryRecord with the final state attached.

    Raises:
        IntegrationError: On non-finite values or undershoot beyond roundoff.
    """
    from agevir import diagnostics as dg

    if not horizon > 0:
        raise DomainError("horizon must be positive")
    if state is None:
        state = init_state(scenario, build_grid(scenario, dtheta, theta_max))
    grid = state.grid
    integ = AgeIntegrator(scenario, state)
    n_steps = int(round(horizon / grid.dtheta))
    every = max(1, int(round(stride / grid.dtheta)))
    slice_steps = {int(round((s - state.t) / grid.dtheta)): s for s in slice_times}
    evaluators = dg.make_evaluators(scenario, grid, diagnostics)

    times, Ts, Is, Vs, As, oks = [], [], [], [], [], []
    diag = {k: [] for k in evaluators}
    undefined = {k: 0 for k in evaluators}
    slices = {}

    def sample():
        snap = integ.snapshot()
        times.append(snap.t)
        Ts.append(snap.T)
        Is.append(snap.I)
        Vs.append(snap.V)
        As.append(snap.A)
        for k, ev in evaluators.items():
            val = ev(snap)
            if math.isnan(val):
                undefined[k] += 1
            diag[k].append(val)
        if monitor_omega:
            oks.append(all(omega_flags(scenario, snap).values()))
        return snap

    sample()
    if 0 in slice_steps:
        s0 = integ.snapshot()
        slices[s0.t] = (grid.midpoints, s0.density())
    for i in range(1, n_steps + 1):
        integ.step()
        if i in slice_steps:
            snap = integ.snapshot()
            slices[snap.t] = (grid.midpoints, snap.density())
        if i % every == 0 or i == n_steps:
            sample()

    ok = np.array(oks) if monitor_omega else None
    burn_in = None
    if ok is not None and not ok.all():
        bad = np.nonzero(~ok)[0]
        burn_in = float(times[bad[-1] + 1]) if bad[-1] + 1 < len(times) else None
    rec = TrajectoryRecord(
        np.array(times), np.array(Ts), np.array(Is), np.array(Vs), np.array(As),
        {k: np.array(v) for k, v in diag.items()}, ok, slices, integ.snapshot(),
        {"model": "age", "dtheta": grid.dtheta, "theta_max": grid.theta_max,
         "clamped": integ.clamped, "undefined": undefined, "omega_burn_in": burn_in})
    return rec


# -- frozen forcing --------------------------------------------------------------------


def transport_frozen(kernel: AgeKernel, boundary, dtheta: float, n_steps: int,
                     K: int | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Transport a single class under a prescribed boundary rate b(t).

    Uses the same cohort update as :class:`AgeIntegrator`; returns the cell
    midpoints and the density there after ``n_steps`` steps from an empty
    population.
    """
    K = K or n_steps
    buf = np.zeros(K)
    for m in range(n_steps):
        buf = np.roll(buf, 1)
        buf[0] = 0.5 * (boundary(m * dtheta) + boundary((m + 1) * dtheta))
    mids = (np.arange(K) + 0.5) * dtheta
    return mids, buf * kernel.survival(mids)
