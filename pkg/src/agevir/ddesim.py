"""Delay-differential reduction for constant death and delayed-constant production.

With ``delta_j(theta) = delta_j*`` and ``P_j = P_j*`` after the onset ``omega``
(zero before it), the infected totals ``I_j = int i_j`` close the system::

    T_j' = lambda_j - d_j T_j - h_j(T_j, V)
    I_j' = h_j(T_j, V) - delta_j* I_j
    V'   = sum_j P_j* exp(-delta_j* omega) I_j(t - omega) - c V - q A V
    A'   = k A V / (h + A) - b A

Integration is Heun's method on a fixed step ``dt = omega / m`` so every
delayed lookup lands on a stored node (method of steps).  History on
``[-omega, 0]`` is constant, tabulated (piecewise cubic Hermite) or derived
from an initial age profile.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.interpolate import PchipInterpolator

from agevir.errors import DomainError, IntegrationError, ValidationError
from agevir.kernels import ConstantDeath, DelayedConstant
from agevir.scenario import Scenario
from agevir.trajectory import TrajectoryRecord

DEFAULT_DT = 0.01
MIN_STEPS_PER_DELAY = 50
UNDERSHOOT_RTOL = 1e-12


def reducible_shape(scenario: Scenario) -> tuple[float, list[tuple[float, float]]]:
    """(omega, [(delta_j*, P_j*), ...]) or ValidationError if not reducible."""
    omegas = set()
    rows = []
    for j, cl in enumerate(scenario.classes):
        death, prod = cl.kernel.death, cl.kernel.production
        if not isinstance(death, ConstantDeath) or not isinstance(prod, DelayedConstant):
            raise ValidationError(
                f"classes[{j}]: delay reduction needs constant death and delayed-constant "
                f"production, got {death.kind}/{prod.kind}")
        omegas.add(prod.omega)
        rows.append((death.delta_star, prod.p_star))
    if len(omegas) != 1:
        raise ValidationError("delay reduction needs one production onset shared by all classes")
    omega = omegas.pop()
    if scenario.omega is not None and scenario.omega != omega:
        raise ValidationError(f"dde.omega={scenario.omega} differs from the kernel onset {omega}")
    return omega, rows


def step_size(omega: float, dt: float | None = None) -> tuple[float, int]:
    """Step and steps-per-delay; the step divides omega exactly."""
    target = dt or DEFAULT_DT
    if omega == 0.0:
        return target, 0
    m = max(MIN_STEPS_PER_DELAY, math.ceil(omega / target - 1e-9))
    return omega / m, m


def consistent_history(scenario: Scenario, times: np.ndarray) -> np.ndarray:
    """I_j(s) for s <= 0 matching the age-structured model's initial profile.

    For s in [-omega, 0] the cells that will be older than omega at time
    s + omega have ages above -s now, so I_j(s) = exp(-delta* s) int_{-s}^inf i0.
    """
    _, rows = reducible_shape(scenario)
    profs = scenario.initial_profiles()
    out = np.empty((scenario.n, len(times)))
    for j, (dstar, _) in enumerate(rows):
        for k, s in enumerate(times):
            out[j, k] = math.exp(-dstar * s) * profs[j].tail_mass(-s)
    return out


def _history_values(scenario, I0, times):
    hist = scenario.initial.history
    if hist.kind == "consistent":
        return consistent_history(scenario, times)
    if hist.kind == "tabulated":
        ht = np.asarray(hist.times)
        if ht[0] > times[0] + 1e-12:
            raise DomainError(f"tabulated history starts at {ht[0]}, needs {times[0]}")
        vals = np.array(hist.values)
        return np.array([np.maximum(PchipInterpolator(ht, v)(times), 0.0) for v in vals])
    return np.repeat(np.asarray(I0, dtype=float)[:, None], len(times), axis=1)


def _rhs(sc, rows, T, I, V, A, I_del, omega):
    g = sc.globals
    fT, fI = [], []
    prod = 0.0
    for j, cl in enumerate(sc.classes):
        h = cl.incidence._rate(T[j], V)
        fT.append(cl.lam - cl.d * T[j] - h)
        fI.append(h - rows[j][0] * I[j])
        prod += rows[j][1] * math.exp(-rows[j][0] * omega) * I_del[j]
    fV = prod - g.c * V - g.q * A * V
    fA = g.k * A * V / (g.h + A) - g.b * A
    return fT, fI, fV, fA


def simulate_dde(scenario: Scenario, horizon: float, *, stride: float = 1.0,
                 dt: float | None = None, T=None, I=None, V=None, A=None) -> TrajectoryRecord:
    """Integrate the delayed system from the scenario's initial data.

    Args:
        scenario: Reducible scenario.
        horizon: Days to integrate.
        stride: Sampling interval, rounded to whole steps.
        dt: Target step; the actual step is ``omega / m`` with at least
            50 steps per delay.
        T, I, V, A: Overrides for the initial values.

    Returns:
        TrajectoryRecord sampled every ``stride`` days.
    """
    omega, rows = reducible_shape(scenario)
    if not horizon > 0:
        raise DomainError("horizon must be positive")
    n = scenario.n
    ini = scenario.initial
    T = [float(x) for x in (T if T is not None else scenario.initial_T())]
    if I is None:
        I = ini.I if ini.I is not None else [p.total for p in scenario.initial_profiles()]
    I = [float(x) for x in I]
    V = float(ini.V if V is None else V)
    A = float(ini.A if A is None else A)
    if min(T + I + [V, A]) < 0 or not all(map(math.isfinite, T + I + [V, A])):
        raise DomainError("initial data must be finite and non-negative")

    h_step, m = step_size(omega, dt or scenario.numerics.dt)
    n_steps = int(round(horizon / h_step))
    every = max(1, int(round(stride / h_step)))
    # buffer position p holds time (p - m) * h_step
    Ibuf = np.empty((n, m + n_steps + 1))
    if m:
        hist_t = (np.arange(m + 1) - m) * h_step
        Ibuf[:, :m + 1] = _history_values(scenario, I, hist_t)
        Ibuf[:, m] = I
    else:
        Ibuf[:, 0] = I

    scale = [max(abs(x), 1e-300) for x in T + I + [V, A]]
    scale[:n] = [max(s, cl.T0) for s, cl in zip(scale[:n], scenario.classes)]
    clamped = 0
    names = [f"T_{j + 1}" for j in range(n)] + [f"I_{j + 1}" for j in range(n)] + ["V", "A"]

    def guard(vec, t):
        nonlocal clamped
        out = []
        for i, x in enumerate(vec):
            if not math.isfinite(x):
                raise IntegrationError(f"{names[i]} became non-finite at t={t:.6g}")
            if x < 0:
                if x < -UNDERSHOOT_RTOL * scale[i]:
                    raise IntegrationError(f"{names[i]} undershoot {x:.3g} at t={t:.6g}")
                clamped += 1
                x = 0.0
            out.append(x)
            if x > scale[i]:
                scale[i] = x
        return out

    times, samples = [0.0], [T + I + [V, A]]
    for s in range(n_steps):
        t = s * h_step
        I_del = Ibuf[:, s] if m else I
        fT, fI, fV, fA = _rhs(scenario, rows, T, I, V, A, I_del, omega)
        pred = guard([T[j] + h_step * fT[j] for j in range(n)]
                     + [I[j] + h_step * fI[j] for j in range(n)]
                     + [V + h_step * fV, A + h_step * fA], t + h_step)
        Tp, Ip, Vp, Ap = pred[:n], pred[n:2 * n], pred[2 * n], pred[2 * n + 1]
        I_del_p = Ibuf[:, s + 1] if m else Ip
        gT, gI, gV, gA = _rhs(scenario, rows, Tp, Ip, Vp, Ap, I_del_p, omega)
        half = 0.5 * h_step
        new = guard([T[j] + half * (fT[j] + gT[j]) for j in range(n)]
                    + [I[j] + half * (fI[j] + gI[j]) for j in range(n)]
                    + [V + half * (fV + gV), A + half * (fA + gA)], t + h_step)
        T, I, V, A = new[:n], new[n:2 * n], new[2 * n], new[2 * n + 1]
        Ibuf[:, m + s + 1] = I
        if (s + 1) % every == 0 or s + 1 == n_steps:
            times.append((s + 1) * h_step)
            samples.append(new)

    arr = np.array(samples)
    return TrajectoryRecord(
        np.array(times), arr[:, :n], arr[:, n:2 * n], arr[:, 2 * n], arr[:, 2 * n + 1],
        meta={"model": "dde", "dt": h_step, "steps_per_delay": m, "omega": omega,
              "clamped": clamped})


def equilibrium_check_dde(scenario: Scenario, steady) -> float:
    """Max scale-relative residual of the delayed system at a steady state."""
    omega, rows = reducible_shape(scenario)
    T = list(steady.T)
    I = [b / dstar for b, (dstar, _) in zip(steady.boundary, rows)]
    fT, fI, fV, fA = _rhs(scenario, rows, T, I, steady.V, steady.A, I, omega)
    g = scenario.globals
    res = [abs(f) / cl.lam for f, cl in zip(fT, scenario.classes)]
    res += [abs(f) / max(b, 1e-300) if b else abs(f) for f, b in zip(fI, steady.boundary)]
    res.append(abs(fV) / max(g.c * steady.V, 1e-300) if steady.V else abs(fV))
    res.append(abs(fA) / max(g.b * steady.A, 1e-300) if steady.A else abs(fA))
    return max(res)
