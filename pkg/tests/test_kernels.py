import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from agevir.errors import DomainError, ValidationError
from agevir.kernels import (AgeKernel, ConstantDeath, ConstantProduction, DelayedConstant,
                            DelayedSaturating, ExponentialGrowth, PiecewiseDeath,
                            TabulatedDeath, TabulatedProduction, burst_size, gamma_weight,
                            production_kernel, survival)

DELAYED = AgeKernel(ConstantDeath(0.01), DelayedConstant(11.4059, 0.5))
MACRO = AgeKernel(ConstantDeath(1 / 14.1), ExponentialGrowth(0.1, 1.0, 0.00084))
LYMPH = AgeKernel(PiecewiseDeath(0.0046, 1.5, 0.25), DelayedSaturating(64201.0, 1.0, 0.25))

FAMILIES = [
    DELAYED,
    MACRO,
    LYMPH,
    AgeKernel(ConstantDeath(0.3), ConstantProduction(5.0)),
    AgeKernel(PiecewiseDeath(0.05, 0.8, 2.0), DelayedConstant(10.0, 1.0)),
    AgeKernel(TabulatedDeath((0.0, 1.0, 3.0), (0.1, 0.5, 0.9)),
              TabulatedProduction((0.0, 0.5, 2.0, 4.0), (0.0, 3.0, 6.0, 1.0))),
    AgeKernel(PiecewiseDeath(0.2, 0.6, 1.0), ExponentialGrowth(0.5, 2.0, 0.05)),
]


def quad_oracle_gamma(kernel, x):
    """gamma(x) by adaptive quadrature of P(theta) exp(-int_x^theta delta)."""
    bps = sorted({b for b in kernel.breakpoints if b > x})
    hx = float(kernel.death.hazard(x))

    def f(th):
        return float(kernel.production.rate(th)) * math.exp(hx - float(kernel.death.hazard(th)))

    edges = [x] + bps
    total = sum(quad(f, a, b, epsabs=0, epsrel=1e-13, limit=200)[0]
                for a, b in zip(edges[:-1], edges[1:]))
    # the integrand decays at least like exp(-(tail death - growth) theta)
    end = edges[-1] + 60.0 / (kernel.death.tail_rate - kernel.production.growth)
    return total + quad(f, edges[-1], end, epsabs=0, epsrel=1e-13, limit=400)[0]


class TestSurvival:
    def test_at_zero(self):
        for k in FAMILIES:
            assert survival(k, 0.0) == 1.0

    def test_constant(self):
        assert survival(DELAYED, 0.5) == pytest.approx(math.exp(-0.005), rel=1e-15)

    def test_piecewise_vs_quadrature(self):
        oracle = math.exp(-quad(lambda t: float(LYMPH.death.rate(t)), 0, 1, points=[0.25])[0])
        got = survival(LYMPH, 1.0)
        assert got == pytest.approx(math.exp(-0.0046 * 0.25 - 1.5 * 0.75), rel=1e-14)
        assert got == pytest.approx(oracle, rel=1e-12)

    def test_bounds(self):
        th = np.linspace(0, 50, 501)
        for k in FAMILIES:
            s = survival(k, th)
            assert np.all(s > 0) and np.all(s <= 1)
            assert np.all(np.diff(s) <= 0)
            assert np.all(s <= np.exp(-k.delta_min * th) * (1 + 1e-14))

    def test_negative_age(self):
        with pytest.raises(DomainError):
            survival(DELAYED, -1.0)

    @given(a=st.floats(0, 20), b=st.floats(0, 20))
    def test_multiplicative(self, a, b):
        k = AgeKernel(PiecewiseDeath(0.2, 1.1, 3.0), ConstantProduction(1.0))
        shifted = math.exp(-(float(k.death.hazard(a + b)) - float(k.death.hazard(a))))
        np.testing.assert_allclose(survival(k, a + b), survival(k, a) * shifted, rtol=1e-14)


class TestBurstSize:
    def test_zero_production(self):
        k = AgeKernel(ConstantDeath(0.1), ConstantProduction(0.0))
        assert burst_size(k) == 0.0
        assert gamma_weight(k, 3.0) == 0.0

    def test_delayed_constant(self):
        oracle = quad_oracle_gamma(DELAYED, 0.0)
        assert burst_size(DELAYED) == pytest.approx(11.4059 * math.exp(-0.005) / 0.01, rel=1e-14)
        assert burst_size(DELAYED) == pytest.approx(oracle, rel=1e-8)
        assert burst_size(DELAYED) == pytest.approx(1134.90, abs=0.01)

    def test_macrophage(self):
        closed = 0.1 * 14.1 + 1.0 / (1 / 14.1 - 0.00084 * math.log(10))
        assert burst_size(MACRO) == pytest.approx(closed, rel=1e-13)
        assert burst_size(MACRO) == pytest.approx(15.9053, abs=1e-4)
        assert MACRO.burst_size_quadrature() == pytest.approx(closed, rel=1e-10)

    @pytest.mark.parametrize("kernel", FAMILIES)
    def test_closed_matches_quadrature(self, kernel):
        q = kernel.burst_size_quadrature()
        oracle = quad_oracle_gamma(kernel, 0.0)
        closed = kernel.burst_size_closed_form()
        if closed is not None:
            assert closed == pytest.approx(q, rel=1e-8)
        assert kernel.burst_size == pytest.approx(oracle, rel=1e-8)

    def test_divergent_tail_rejected(self):
        with pytest.raises(ValidationError, match="divergent tail"):
            AgeKernel(ConstantDeath(0.001), ExponentialGrowth(0.0, 1.0, 0.01))

    def test_nonpositive_death_rejected(self):
        with pytest.raises(ValidationError):
            ConstantDeath(0.0)
        with pytest.raises(ValidationError):
            TabulatedDeath((0.0, 1.0), (0.1, 0.0))


class TestGamma:
    @pytest.mark.parametrize("kernel", FAMILIES)
    def test_zero_is_burst_size(self, kernel):
        assert gamma_weight(kernel, 0.0) == burst_size(kernel)

    def test_constant_tail(self):
        for x in (0.5, 1.0, 10.0, 300.0):
            assert gamma_weight(DELAYED, x) == pytest.approx(11.4059 / 0.01, rel=1e-14)

    @pytest.mark.parametrize("kernel", FAMILIES)
    def test_against_adaptive_quadrature(self, kernel):
        for x in (0.1, 0.7, 2.5, 7.0):
            assert gamma_weight(kernel, x) == pytest.approx(quad_oracle_gamma(kernel, x),
                                                             rel=1e-8)

    @pytest.mark.parametrize("kernel", FAMILIES)
    def test_bounded(self, kernel):
        if math.isinf(kernel.p_max):
            pytest.skip("unbounded production")
        for x in np.linspace(0, 10, 21):
            assert 0 <= gamma_weight(kernel, x) <= kernel.p_max / kernel.delta_min * (1 + 1e-12)

    @pytest.mark.parametrize("kernel", FAMILIES)
    def test_derivative_identity(self, kernel):
        bps = np.array(kernel.breakpoints or (0.0,))
        for x in np.linspace(0.05, 8.0, 40):
            if np.min(np.abs(bps - x)) < 1e-3:
                continue
            eps = 1e-4 * max(1.0, x)
            fd = (gamma_weight(kernel, x + eps) - gamma_weight(kernel, x - eps)) / (2 * eps)
            rhs = float(kernel.death.rate(x)) * gamma_weight(kernel, x) - float(
                kernel.production.rate(x))
            assert fd == pytest.approx(rhs, rel=1e-6, abs=1e-6 * gamma_weight(kernel, x))


class TestProductionKernel:
    def test_before_onset(self):
        assert production_kernel(DELAYED, 0.3) == 0.0

    def test_at_onset(self):
        assert production_kernel(DELAYED, 0.5) == pytest.approx(11.4059 * math.exp(-0.005),
                                                                rel=1e-15)

    @pytest.mark.parametrize("kernel", FAMILIES[2:])
    def test_integrates_to_burst_size(self, kernel):
        pts = list(kernel.breakpoints)
        total = quad(lambda t: production_kernel(kernel, t), 0, 60, points=pts or None,
                     limit=400, epsrel=1e-12)[0]
        total += quad(lambda t: production_kernel(kernel, t), 60, np.inf, limit=400)[0]
        assert total == pytest.approx(burst_size(kernel), rel=1e-8)


class TestSerialization:
    @pytest.mark.parametrize("kernel", FAMILIES)
    def test_round_trip(self, kernel):
        assert AgeKernel.from_dict(kernel.to_dict()) == kernel

    def test_missing_field(self):
        with pytest.raises(ValidationError):
            AgeKernel.from_dict({"delta": {"kind": "constant", "delta_star": 1.0}})


@settings(max_examples=60, deadline=None)
@given(d1=st.floats(0.01, 2.0), d2=st.floats(0.01, 2.0), tau=st.floats(0.0, 5.0),
       p=st.floats(0.1, 1e4), om=st.floats(0.0, 3.0))
def test_closed_form_equals_quadrature_randomized(d1, d2, tau, p, om):
    k = AgeKernel(PiecewiseDeath(d1, d2, tau), DelayedConstant(p, om))
    assert k.burst_size_closed_form() == pytest.approx(k.burst_size_quadrature(), rel=1e-8)
