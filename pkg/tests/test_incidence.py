from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from agevir.errors import DomainError, ValidationError
from agevir.incidence import (BeddingtonDeAngelis, Bilinear, Saturated, TabulatedIncidence,
                              evaluate, hbar, incidence_from_dict, partials,
                              verify_hypotheses)

pos = st.floats(min_value=1e-6, max_value=1e7, allow_nan=False)


class TestEvaluate:
    def test_zero_virions_gives_zero(self):
        assert evaluate(Saturated(1e-8, 0.005), 1e4, 0.0) == 0.0

    def test_saturated_matches_exact_rational(self):
        beta, alpha, T, V = 1e-8, 0.005, 1e4, 200.0
        exact = (Fraction(beta) * Fraction(T) * Fraction(V)
                 / (1 + Fraction(alpha) * Fraction(V)))
        got = evaluate(Saturated(beta, alpha), T, V)
        assert got == pytest.approx(float(exact), rel=1e-15)
        assert got == pytest.approx(1e-2, rel=1e-12)

    def test_bilinear(self):
        assert evaluate(Bilinear(2.0), 3.0, 5.0) == 30.0

    def test_zero_cells_gives_zero(self):
        for m in (Bilinear(2.0), Saturated(1.0, 0.1), BeddingtonDeAngelis(1.0, 0.2, 0.3)):
            assert evaluate(m, 0.0, 7.0) == 0.0

    @pytest.mark.parametrize("T,V", [(-1.0, 1.0), (1.0, -1.0), (np.nan, 1.0), (1.0, np.inf)])
    def test_domain_errors(self, T, V):
        with pytest.raises(DomainError):
            evaluate(Saturated(1e-8, 0.005), T, V)


class TestHbar:
    def test_limit_at_zero(self):
        assert hbar(Saturated(1e-8, 0.005), 1e4, 0.0) == pytest.approx(1e-4, rel=1e-15)

    def test_bilinear_independent_of_v(self):
        m = Bilinear(3e-7)
        assert hbar(m, 500.0, 1.0) == hbar(m, 500.0, 1e6)

    def test_saturated_decays(self):
        assert hbar(Saturated(1e-8, 0.005), 1e4, 1e9) < 1e-8

    @given(T=pos, V=pos)
    def test_rate_is_v_times_hbar(self, T, V):
        for m in (Bilinear(2e-7), Saturated(1e-8, 0.005), BeddingtonDeAngelis(1e-7, 1e-3, 0.01)):
            r = evaluate(m, T, V)
            assert abs(r - V * hbar(m, T, V)) <= 4 * np.spacing(r)


class TestPartials:
    def test_bilinear(self):
        assert partials(Bilinear(2.0), 3.0, 5.0) == (10.0, 6.0)

    def test_saturated_at_zero(self):
        dT, dV = partials(Saturated(1e-8, 0.005), 1e4, 0.0)
        assert dT == 0.0
        assert dV == pytest.approx(1e-4, rel=1e-15)

    @pytest.mark.parametrize("model", [Bilinear(2e-7), Saturated(1e-8, 0.005),
                                       BeddingtonDeAngelis(1e-7, 1e-3, 0.01)])
    def test_match_central_differences(self, model, rng):
        for _ in range(120):
            T, V = rng.uniform(1.0, 1e4), rng.uniform(1.0, 1e3)
            dT, dV = partials(model, T, V)
            sT, sV = 1e-5 * max(1, T), 1e-5 * max(1, V)
            fdT = (evaluate(model, T + sT, V) - evaluate(model, T - sT, V)) / (2 * sT)
            fdV = (evaluate(model, T, V + sV) - evaluate(model, T, V - sV)) / (2 * sV)
            assert dT == pytest.approx(fdT, rel=1e-6)
            assert dV == pytest.approx(fdV, rel=1e-6)

    def test_tabulated_uses_differences_and_rejects_outside(self):
        tab = TabulatedIncidence.from_function(lambda t, v: 1e-3 * t / (1 + 0.1 * v),
                                               np.linspace(0, 100, 11), np.linspace(0, 50, 11))
        dT, dV = partials(tab, 55.0, 12.0)
        assert dT > 0 and dV > 0
        with pytest.raises(DomainError):
            evaluate(tab, 101.0, 1.0)


class TestNullclineClosedForms:
    @pytest.mark.parametrize("model", [Bilinear(3e-7), Saturated(5e-8, 0.005),
                                       BeddingtonDeAngelis(1e-6, 2e-4, 0.01)])
    def test_closed_form_solves_balance(self, model):
        lam, d = 46.0, 0.0046
        for V in (0.0, 1.0, 100.0, 1e5):
            T = model.nullcline(lam, d, V)
            assert 0 < T <= lam / d
            assert lam - d * T - model._rate(T, V) == pytest.approx(0.0, abs=1e-9 * lam)


class TestHypotheses:
    @given(beta=st.floats(1e-10, 1.0), alpha=st.floats(1e-6, 10.0),
           tmax=st.floats(1.0, 1e7), vmax=st.floats(1.0, 1e7))
    @settings(max_examples=30, deadline=None)
    def test_saturated_passes(self, beta, alpha, tmax, vmax):
        assert verify_hypotheses(Saturated(beta, alpha), (tmax, vmax), grid_n=9).passed

    def test_beddington_deangelis_passes(self):
        rep = verify_hypotheses(BeddingtonDeAngelis(1e-6, 1e-3, 0.01), (1e4, 1e4))
        assert rep.passed

    def test_tabulated_violation_reported(self):
        tab = TabulatedIncidence.from_function(lambda t, v: t * (1 + v),
                                               np.linspace(0, 10, 6), np.linspace(0, 10, 6))
        rep = verify_hypotheses(tab, (10.0, 10.0))
        assert not rep.h3_monotone
        assert rep.first_violation["hypothesis"] == "H3"
        assert not rep.smooth

    def test_bilinear_is_non_decaying(self):
        rep = verify_hypotheses(Bilinear(1e-7), (1e4, 1e3))
        assert rep.h1 and rep.h2 and rep.h3_monotone
        assert rep.h3_decay == "non-decaying"
        assert not rep.passed

    def test_bad_box(self):
        with pytest.raises(DomainError):
            verify_hypotheses(Bilinear(1.0), (0.0, 1.0))
        with pytest.raises(DomainError):
            verify_hypotheses(Bilinear(1.0), (1.0, 1.0), grid_n=1)


class TestFromDict:
    def test_round_trip(self):
        for m in (Bilinear(2.0), Saturated(1e-8, 0.005), BeddingtonDeAngelis(1.0, 0.5, 0.25)):
            assert incidence_from_dict(m.to_dict()) == m

    def test_tabulated_round_trip(self):
        tab = TabulatedIncidence.from_function(lambda t, v: t / (1 + v), [0, 1, 2], [0, 1])
        assert incidence_from_dict(tab.to_dict()) == tab

    def test_unknown_kind(self):
        with pytest.raises(ValidationError):
            incidence_from_dict({"kind": "quadratic"})

    def test_nonpositive_beta(self):
        with pytest.raises(ValidationError):
            Saturated(0.0, 0.1)
