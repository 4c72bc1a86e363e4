import math

import numpy as np
import pytest

from agevir.agesim import (build_grid, default_theta_max, init_state, omega_flags, simulate,
                           state_from_steady, step, transport_frozen, viral_production)
from agevir.equilibria import infection_free, solve_antibody, solve_immune_free
from agevir.errors import DomainError
from agevir.kernels import AgeKernel, ConstantDeath, DelayedConstant, PiecewiseDeath
from agevir.scenario import AgeProfile, Scenario


def no_production(sc, i0_rate=0.5, amplitude=2.0):
    spec = sc.to_dict()
    spec["classes"][0]["kernel"]["production"] = {"kind": "constant", "p_star": 0.0}
    spec["initial"] = {"T": [1e4], "V": 0.0, "A": 0.0,
                       "i0": [{"kind": "exponential", "amplitude": amplitude,
                               "rate": i0_rate}]}
    spec.pop("dde", None)
    return Scenario.from_dict(spec)


class TestGrid:
    def test_cell_weights_sum_to_integrals(self, t1_mid):
        grid = build_grid(t1_mid, 0.01)
        k = t1_mid.classes[0].kernel
        assert grid.S[0].sum() + grid.tail_S[0] == pytest.approx(k.mean_lifetime, rel=1e-12)
        assert grid.P[0].sum() + grid.tail_P[0] == pytest.approx(k.burst_size, rel=1e-12)

    def test_theta_max_default(self, t1_mid, two_class):
        assert default_theta_max(t1_mid, 0.01) == pytest.approx(100.0)
        assert build_grid(two_class, 0.01).theta_max > 300

    def test_bad_step(self, t1_mid):
        with pytest.raises(DomainError):
            build_grid(t1_mid, -0.1)


class TestFixedPoints:
    def test_infection_free(self, t1_low):
        grid = build_grid(t1_low, 0.01)
        s = state_from_steady(t1_low, infection_free(t1_low), grid)
        rec = simulate(t1_low, 5.0, state=s)
        assert np.all(rec.V == 0) and np.all(rec.I == 0)
        np.testing.assert_array_equal(rec.T[-1], [1e4])

    @pytest.mark.parametrize("solver,name", [(solve_immune_free, "t1_mid"),
                                             (solve_antibody, "t1_high")])
    def test_infected_states(self, solver, name, request):
        sc = request.getfixturevalue(name)
        eq = solver(sc)
        grid = build_grid(sc, 0.01)
        rec = simulate(sc, 20.0, state=state_from_steady(sc, eq, grid))
        np.testing.assert_allclose(rec.V, eq.V, rtol=1e-10)
        np.testing.assert_allclose(rec.A, eq.A, rtol=1e-10)
        np.testing.assert_allclose(rec.T[:, 0], eq.T[0], rtol=1e-12)
        np.testing.assert_allclose(rec.I[:, 0], eq.I[0], rtol=1e-10)


class TestViralProduction:
    def test_zero_density(self, t1_mid):
        s = init_state(t1_mid, build_grid(t1_mid, 0.01))
        assert viral_production(s) == 0.0

    def test_equals_clearance_at_equilibrium(self, t1_mid, two_class):
        for sc in (t1_mid, two_class):
            est = solve_immune_free(sc)
            s = state_from_steady(sc, est, build_grid(sc, 0.01))
            assert viral_production(s) == pytest.approx(sc.c * est.V, rel=1e-10)

    def test_support_before_onset(self, t1_mid):
        grid = build_grid(t1_mid, 0.01)
        s = init_state(t1_mid, grid, profiles=(AgeProfile("tabulated", ages=(0.0, 0.2, 0.4),
                                                          values=(1.0, 2.0, 0.0)),))
        assert s.I[0] > 0
        assert viral_production(s) == 0.0


class TestExactness:
    def test_pure_decay(self, t1_low):
        sc = no_production(t1_low)
        rec = simulate(sc, 50.0, dtheta=0.01, stride=5.0)
        I0 = rec.I[0, 0]
        assert I0 == pytest.approx(2.0 / 0.5, rel=1e-12)
        np.testing.assert_allclose(rec.I[:, 0], I0 * np.exp(-0.01 * rec.times), rtol=1e-10)

    def test_pure_decay_piecewise(self, t1_low):
        spec = no_production(t1_low).to_dict()
        spec["classes"][0]["kernel"]["delta"] = {"kind": "piecewise", "d": 0.05,
                                                 "delta_star": 0.4, "tau": 1.0}
        sc = Scenario.from_dict(spec)
        rec = simulate(sc, 10.0, dtheta=0.01, stride=1.0, theta_max=150.0)
        k = sc.classes[0].kernel
        # survivors of each initial age a: 2 e^{-0.5 a} sigma(a + t)/sigma(a); the
        # initial profile is stored as b*sigma per cell, so agreement is O(dtheta^2)
        a = np.linspace(0, 150, 300001)
        for t, I in zip(rec.times, rec.I[:, 0]):
            dens = 2 * np.exp(-0.5 * a) * k.survival(a + t) / k.survival(a)
            assert I == pytest.approx(np.trapezoid(dens, a), rel=1e-5)

    def test_frozen_transport_second_order(self):
        kernel = AgeKernel(PiecewiseDeath(0.3, 1.2, 0.7), DelayedConstant(1.0, 0.5))
        b = lambda t: 1.0 + 0.5 * np.sin(2.0 * t)  # noqa: E731
        t_end = 2.0
        errs = []
        for dth in (0.02, 0.01, 0.005):
            mids, dens = transport_frozen(kernel, b, dth, int(round(t_end / dth)))
            exact = b(t_end - mids) * kernel.survival(mids)
            errs.append(np.max(np.abs(dens - exact)))
        assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.1)
        assert errs[1] / errs[2] == pytest.approx(4.0, rel=0.1)

    def test_initial_mass(self, two_class):
        s = init_state(two_class, build_grid(two_class, 0.01))
        assert s.I[0] == pytest.approx(1.194e-4 / 10, rel=1e-12)


class TestInvariants:
    def test_antibody_free_subspace(self, t1_high):
        rec = simulate(t1_high.replace_value("initial.A", 0.0), 100.0)
        assert np.all(rec.A == 0.0)
        assert rec.V[-1] > 0

    @pytest.mark.parametrize("name", ["t1_low", "t1_mid", "t1_high"])
    def test_nonnegative_and_inside_region(self, name, request):
        sc = request.getfixturevalue(name)
        rec = simulate(sc, 100.0)
        assert rec.as_matrix().min() >= 0
        assert rec.omega_ok.all()
        assert rec.meta["omega_burn_in"] is None

    def test_outside_region_reports_burn_in(self, t1_mid):
        sc = t1_mid.replace_value("initial.V", 1e7)
        rec = simulate(sc, 30.0)
        assert not rec.omega_ok[0]
        assert rec.meta["omega_burn_in"] is not None
        assert rec.omega_ok[-1]
        assert all(omega_flags(sc, rec.final_state).values())

    def test_step_function(self, t1_mid):
        s0 = init_state(t1_mid, build_grid(t1_mid, 0.01))
        s1 = step(t1_mid, s0)
        assert s1.t == pytest.approx(0.01)
        assert s0.t == 0.0 and s1.I[0] > 0


def test_second_order_in_step(t1_mid):
    finals = []
    for dth in (0.04, 0.02, 0.01):
        rec = simulate(t1_mid, 20.0, dtheta=dth, stride=20.0)
        finals.append(rec.state_at(-1))
    f = np.array(finals)
    ratio = np.abs(f[0] - f[1]) / np.abs(f[1] - f[2])
    # T, I, V all converge at second order
    np.testing.assert_allclose(ratio[:3], 4.0, rtol=0.15)


def test_slices(t1_mid):
    rec = simulate(t1_mid, 2.0, slice_times=(0.0, 1.0, 2.0))
    assert sorted(rec.slices) == pytest.approx([0.0, 1.0, 2.0])
    mids, dens = rec.slices[sorted(rec.slices)[1]]
    assert dens.shape == (1, len(mids))
    assert dens[0, mids > 1.0].max() == 0.0
    assert dens[0, mids < 1.0].min() > 0.0


def test_bad_horizon(t1_mid):
    with pytest.raises(DomainError):
        simulate(t1_mid, 0.0)
