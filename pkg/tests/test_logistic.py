import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from shufflecast.beamforming import (AnchorSingularityError, LogisticFitError, LogisticParams,
                                     fit_logistic, logistic_score, logistic_score_db, surrogate_coeffs,
                                     zeta)
from shufflecast.numerics import make_rng

EXPONENTS = [0.5, 1.0, 1.5, 2.3]


class TestScore:

    def test_midpoint(self):
        assert logistic_score(1.0, LogisticParams(0, 1, 1, 1)) == pytest.approx(0.5)

    def test_saturation(self):
        p = LogisticParams(0.1, 2.0, 4.0, 0.8)
        assert logistic_score(1e9, p) == pytest.approx(p.a + p.b / p.c, abs=1e-6)

    def test_db_form(self):
        p = LogisticParams(0.1, 0.9, 1.3, 1.7)
        assert logistic_score_db(10 * math.log10(4.0), p) == pytest.approx(logistic_score(4.0, p), abs=1e-12)
        assert p.d == pytest.approx(p.e * math.log(10) / 10, abs=1e-15)
        q = LogisticParams.from_db_slope(0.1, 0.9, 1.3, p.d)
        assert q.e == pytest.approx(p.e, abs=1e-9)

    def test_domain(self):
        with pytest.raises(ValueError):
            logistic_score(0.0, LogisticParams())
        with pytest.raises(ValueError):
            LogisticParams(0, -1, 1, 1)

    @settings(max_examples=50, deadline=None)
    @given(st.floats(1e-3, 1e3), st.floats(1.0001, 10), st.floats(0.1, 3))
    def test_monotone(self, g, factor, e):
        p = LogisticParams(0, 1, 1.5, e)
        assert logistic_score(g * factor, p) >= logistic_score(g, p)


class TestFit:

    def test_recovers_known_params(self):
        true = LogisticParams(0.2, 0.7, 1.5, 1.2)
        x = np.linspace(-10, 20, 31)
        y = logistic_score_db(x, true)
        fit, rms = fit_logistic(np.column_stack([x, y]), full_output=True)
        for name in "abce":
            assert getattr(fit, name) == pytest.approx(getattr(true, name), rel=0.01)
        assert rms < 1e-6

    def test_constant(self):
        x = np.linspace(0, 20, 10)
        with pytest.raises(LogisticFitError):
            fit_logistic(np.column_stack([x, np.full(10, 0.3)]))

    def test_decreasing(self):
        x = np.linspace(0, 20, 10)
        with pytest.raises(LogisticFitError):
            fit_logistic(np.column_stack([x, 1 - logistic_score_db(x, LogisticParams(0, 1, 1, 1))]))

    def test_too_few_or_narrow(self):
        with pytest.raises(LogisticFitError):
            fit_logistic([(0, 0.1), (20, 0.9)])
        x = np.linspace(0, 5, 10)
        with pytest.raises(LogisticFitError):
            fit_logistic(np.column_stack([x, x / 10]))


class TestSurrogate:

    def test_e_equals_one(self):
        p = LogisticParams(0.1, 0.8, 1.7, 1.0)
        for g0 in [0.05, 1.0, 30.0]:
            co = surrogate_coeffs(g0, p)
            assert co.F == pytest.approx(p.c) and co.G == pytest.approx(1.0)

    def test_printed_e2_example(self):
        p = LogisticParams(0, 1, 2, 2)
        co = surrogate_coeffs(1.0, p)
        assert (float(co.D), float(co.E), float(co.F), float(co.G)) == pytest.approx((1, -2, 4, -1))
        assert zeta(1.0, 1.0, co, p) == pytest.approx(1 / 3)

    def test_low_branch(self):
        p = LogisticParams(0.3, 0.6, 1.0, 0.5)
        co = surrogate_coeffs(2.0, p)
        assert co.D == p.a and co.E == p.b

    def test_singular_anchor(self):
        # c (1 - e) g0^e + 1 = 0 at g0 = 1 for c = 1, e = 2
        with pytest.raises(AnchorSingularityError):
            surrogate_coeffs(1.0, LogisticParams(0, 1, 1, 2))

    @pytest.mark.parametrize("e", EXPONENTS)
    def test_tangency(self, e):
        rng = make_rng(1)
        p = LogisticParams(0.1, 0.9, 1.2, e)
        g0 = rng.uniform(0.01, 100, 2000)
        x = rng.uniform(0.01, 10, 2000)
        co = surrogate_coeffs(g0, p)
        s = logistic_score(g0, p)
        assert np.all(np.abs(zeta(g0 * x, x, co, p) - s) <= 1e-9 * np.abs(s))

    @pytest.mark.parametrize("e", EXPONENTS)
    def test_minorizes(self, e):
        rng = make_rng(2)
        p = LogisticParams(0.1, 0.9, 1.2, e)
        g = rng.uniform(0.01, 100, 10 ** 4)
        g0 = rng.uniform(0.01, 100, 10 ** 4)
        co = surrogate_coeffs(g0, p)
        assert np.all(zeta(g, np.ones_like(g), co, p) <= logistic_score(g, p) + 1e-9)

    def test_exact_at_e1(self):
        rng = make_rng(3)
        p = LogisticParams(0.1, 0.9, 1.2, 1.0)
        g, g0 = rng.uniform(0.01, 100, (2, 10 ** 4))
        co = surrogate_coeffs(g0, p)
        assert np.max(np.abs(zeta(g, np.ones_like(g), co, p) - logistic_score(g, p))) < 1e-12

    def test_clamped_region_continues_with_a(self):
        # e > 1: far below the anchor the ratio form would exceed S, the clamp returns a
        p = LogisticParams(0.05, 1, 2, 2)
        co = surrogate_coeffs(10.0, p)
        assert zeta(0.1, 1.0, co, p) == pytest.approx(p.a)
        assert zeta(0.1, 1.0, co, p) <= logistic_score(0.1, p)
