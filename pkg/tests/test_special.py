import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from divtest.errors import NegativeArgument, NonPositiveArgument, ProbOutOfRange, ValidationError
from divtest.special import (
    chi2_cdf,
    chi2_quantile,
    chi2_tail,
    gamma_p_q,
    ln_factorial_table,
    ln_gamma,
    norm_cdf,
    norm_quantile,
    norm_tail,
)

mpmath.mp.dps = 40


class TestLnGamma:
    @pytest.mark.parametrize("x", [0.5, 1.0, 1.5, 2.0, 3.7, 10.0, 14.99, 15.0, 123.4, 1e4, 1e6])
    def test_matches_mpmath(self, x):
        ref = float(mpmath.loggamma(x))
        assert abs(ln_gamma(x) - ref) <= 1e-13 * max(1.0, abs(ref))

    def test_small_integers(self):
        for n in range(1, 25):
            assert ln_gamma(n + 1.0) == pytest.approx(math.log(math.factorial(n)), rel=1e-14, abs=1e-14)

    def test_half(self):
        assert ln_gamma(0.5) == pytest.approx(0.5 * math.log(math.pi), abs=1e-14)

    @pytest.mark.parametrize("x", [0.0, -1.0, -0.5])
    def test_rejects_nonpositive(self, x):
        with pytest.raises(NonPositiveArgument):
            ln_gamma(x)

    def test_factorial_table(self):
        table = ln_factorial_table(30)
        assert table[0] == 0.0 and table[1] == pytest.approx(0.0, abs=1e-15)
        assert table[30] == pytest.approx(float(mpmath.log(mpmath.factorial(30))), rel=1e-14)


class TestIncompleteGamma:
    @given(a=st.floats(0.5, 20.0), x=st.floats(0.0, 80.0))
    @settings(max_examples=150, deadline=None)
    def test_against_mpmath(self, a, x):
        p, q = gamma_p_q(a, x)
        assert float(p) == pytest.approx(float(mpmath.gammainc(a, 0, x, regularized=True)), abs=1e-13)
        assert float(q) == pytest.approx(float(mpmath.gammainc(a, x, mpmath.inf, regularized=True)), abs=1e-13)

    def test_infinite_argument(self):
        p, q = gamma_p_q(1.5, np.inf)
        assert (float(p), float(q)) == (1.0, 0.0)

    def test_bad_inputs(self):
        with pytest.raises(NonPositiveArgument):
            gamma_p_q(0.0, 1.0)
        with pytest.raises(NegativeArgument):
            gamma_p_q(1.0, -1.0)


class TestChiSquared:
    def test_dof2_closed_form(self):
        c = np.linspace(0.05, 40.0, 20)
        assert np.max(np.abs(chi2_cdf(2, c) - (1 - np.exp(-c / 2)))) <= 1e-12

    @pytest.mark.parametrize("dof", range(1, 9))
    def test_cdf_and_tail_match_mpmath(self, dof):
        for c in (0.01, 0.7, dof - 0.3 if dof > 1 else 0.5, dof + 1.0, 3.0 * dof + 5.0, 60.0):
            ref = float(mpmath.gammainc(dof / 2, 0, c / 2, regularized=True))
            assert chi2_cdf(dof, c) == pytest.approx(ref, abs=1e-14)
            assert chi2_tail(dof, c) == pytest.approx(1 - ref, abs=1e-14)

    def test_quantile_examples(self):
        assert chi2_quantile(2, 0.05) == pytest.approx(-2 * math.log(0.05), abs=1e-10)
        assert chi2_quantile(1, 0.05) == pytest.approx(3.8414588, abs=5e-8)

    @pytest.mark.parametrize("dof", [1, 2, 3, 5, 8])
    def test_quantile_roundtrip(self, dof):
        for e in np.arange(0.01, 1.0, 0.01):
            assert chi2_tail(dof, chi2_quantile(dof, e)) == pytest.approx(e, abs=1e-9)

    def test_monotone_cdf(self):
        c = np.linspace(0, 30, 500)
        for dof in (1, 3, 7):
            assert np.all(np.diff(chi2_cdf(dof, c)) >= 0)

    def test_dof1_normal_identity(self):
        for c in np.linspace(0.0, 25.0, 60):
            assert chi2_cdf(1, c) == pytest.approx(1 - 2 * norm_tail(math.sqrt(c)), abs=1e-10)

    def test_scalar_and_array_outputs(self):
        assert isinstance(chi2_cdf(2, 1.0), float)
        assert chi2_cdf(2, np.array([1.0, 2.0])).shape == (2,)

    def test_errors(self):
        with pytest.raises(ValidationError):
            chi2_cdf(0, 1.0)
        with pytest.raises(NegativeArgument):
            chi2_tail(1, -0.1)
        with pytest.raises(ProbOutOfRange):
            chi2_quantile(1, 1.0)


class TestNormal:
    def test_median(self):
        assert abs(norm_quantile(0.5)) <= 1e-15

    def test_five_percent(self):
        assert norm_quantile(0.05) == pytest.approx(1.6448536, abs=5e-8)

    @pytest.mark.parametrize("x", [0.0, 0.3, 1.0, 2.5, 6.0, 10.0])
    def test_symmetry(self, x):
        assert norm_tail(-x) + norm_tail(x) == pytest.approx(1.0, abs=1e-12)
        assert norm_cdf(x) == pytest.approx(1.0 - norm_tail(x), abs=1e-15)

    @pytest.mark.parametrize("x", [-3.0, -0.5, 0.2, 1.7, 5.0, 9.0])
    def test_tail_matches_mpmath(self, x):
        ref = float(mpmath.ncdf(-x))
        assert norm_tail(x) == pytest.approx(ref, rel=1e-13, abs=1e-300)

    def test_extreme_quantiles(self):
        for e in (1e-12, 1e-6, 0.999999):
            assert norm_tail(norm_quantile(e)) == pytest.approx(e, rel=1e-9)

    def test_rejects_bad_probability(self):
        for e in (0.0, 1.0, -0.1, 2.0):
            with pytest.raises(ProbOutOfRange):
                norm_quantile(e)


def test_chi_root_dominates_normal_quantile():
    # sqrt of the chi-squared quantile beats the normal quantile for every dof
    for m in range(1, 9):
        for e in (0.01, 0.05, 0.1, 0.25, 0.5, 0.9):
            assert math.sqrt(chi2_quantile(m, e)) - norm_quantile(e) > 1e-9
