"""Randomized structural invariants over generated scenarios."""

import math

import numpy as np
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from agevir.equilibria import F, all_steady_states, nullcline_f
from agevir.scenario import Scenario
from agevir.thresholds import BOUNDARY_TOL, classify

N_DRAWS = 1000


def log_uniform(lo, hi):
    return st.floats(math.log10(lo), math.log10(hi)).map(lambda x: 10.0 ** x)


incidence = st.one_of(
    st.builds(lambda b, a: {"kind": "saturated", "beta": b, "alpha": a},
              log_uniform(1e-9, 1e-5), log_uniform(1e-5, 1e-1)),
    st.builds(lambda b, a, c: {"kind": "beddington_deangelis", "beta": b, "a": a, "b": c},
              log_uniform(1e-9, 1e-5), log_uniform(1e-6, 1e-2), log_uniform(1e-5, 1e-1)),
)

death = st.one_of(
    st.builds(lambda d: {"kind": "constant", "delta_star": d}, log_uniform(1e-3, 2.0)),
    st.builds(lambda d, s, t: {"kind": "piecewise", "d": d, "delta_star": s, "tau": t},
              log_uniform(1e-3, 1.0), log_uniform(1e-2, 3.0), st.floats(0.0, 2.0)),
)

production = st.one_of(
    st.builds(lambda p, w: {"kind": "delayed_constant", "p_star": p, "omega": w},
              log_uniform(0.1, 1e4), st.floats(0.0, 3.0)),
    st.builds(lambda p, r, t: {"kind": "delayed_saturating", "p_star": p, "r": r, "theta1": t},
              log_uniform(0.1, 1e4), log_uniform(0.1, 5.0), st.floats(0.0, 2.0)),
)

cell_class = st.fixed_dictionaries({
    "lambda": log_uniform(1.0, 1e4),
    "d": log_uniform(1e-3, 0.5),
    "incidence": incidence,
    "kernel": st.fixed_dictionaries({"delta": death, "production": production}),
})

scenarios = st.builds(
    lambda classes, c, q, k, h, b: Scenario.from_dict({
        "name": "random", "classes": classes,
        "globals": {"c": c, "q": q, "k": k, "h": h, "b": b}}),
    st.lists(cell_class, min_size=1, max_size=3),
    log_uniform(0.05, 30.0), log_uniform(1e-3, 1.0), log_uniform(1e-4, 1e-1),
    log_uniform(0.01, 10.0), log_uniform(0.1, 10.0))


@settings(max_examples=N_DRAWS, deadline=None,
          suppress_health_check=[HealthCheck.too_slow, HealthCheck.filter_too_much])
@given(sc=scenarios)
def test_structural_invariants(sc):
    rep = classify(sc)
    assert rep.r_star < rep.r0
    assert rep.r0 == sum(rep.r_js)

    states = all_steady_states(sc)
    kinds = [s.kind for s in states]
    assert ("EStar" in kinds) == (rep.r0 > 1)
    assert ("EHat" in kinds) == (rep.r_star > 1)
    for s in states:
        assert s.max_residual <= 1e-8, (s.kind, s.residuals)
        assert all(x >= 0 for x in s.T) and s.V >= 0 and s.A >= 0

    if rep.r0 > 1 and abs(rep.r_star - 1) > BOUNDARY_TOL:
        assert np.sign(rep.r_star - 1) == np.sign(rep.r_an - 1)

    vs = np.concatenate([[0.0], np.geomspace(1e-3, 1e8, 30)])
    fv = np.array([F(sc, v) for v in vs])
    # strict decrease is only observable where the step exceeds roundoff of F
    noise = 1e-13 * max(np.max(np.abs(fv)), sc.c)
    dF = np.diff(fv)
    assert np.all(dF <= noise)
    assert np.all(dF[np.abs(dF) > noise] < 0)
    assert fv[-1] < fv[0]
    for j, cl in enumerate(sc.classes):
        f = np.array([nullcline_f(sc, j, v) for v in vs])
        assert f[0] == cl.lam / cl.d
        assert np.all(f > 0) and np.all(f <= cl.lam / cl.d)
        assert np.all(np.diff(f) <= 0)
        assert np.all(np.diff(f[f < 0.999999 * f[0]]) < 0)


@settings(max_examples=200, deadline=None)
@given(sc=scenarios, scale=st.floats(1.5, 4.0))
def test_r0_linear_in_beta(sc, scale):
    spec = sc.to_dict()
    base = classify(sc, with_r_an=False).r_js
    spec["classes"][0]["incidence"]["beta"] *= scale
    scaled = classify(Scenario.from_dict(spec), with_r_an=False).r_js
    assert math.isclose(scaled[0], scale * base[0], rel_tol=1e-13)
    assert scaled[1:] == base[1:]
