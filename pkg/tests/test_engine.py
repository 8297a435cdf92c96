import math

import numpy as np
import pytest

from divtest.divergences import DivergenceSpec
from divtest.engine import (
    Decision,
    TestConfig,
    asymptotic_threshold,
    calibrate_asymptotic,
    decide,
    exact_calibrate,
    np_exact_calibrate,
    np_statistic,
    np_type1_exact,
    np_type2_exact,
    null_statistic_law,
    type1_exact,
    type1_mc,
    type2_exact,
    type2_mc,
    wilson_interval,
)
from divtest.errors import (
    BudgetExceeded,
    DimensionMismatch,
    EqualDistributions,
    MarginTooLarge,
    ProbOutOfRange,
    ValidationError,
)
from divtest.simplex import SeededSource, TypeDistribution, make_distribution

KL = DivergenceSpec.kl()
HALF = make_distribution([0.5, 0.5])


class TestDecide:
    def test_null_type_accepted(self):
        cfg = TestConfig(KL, 0.01, make_distribution([0.75, 0.25]))
        assert decide(cfg, TypeDistribution((3, 1))) is Decision.ACCEPT_H0

    def test_extreme_type_rejected(self):
        cfg = TestConfig(KL, 0.5, HALF)
        assert decide(cfg, TypeDistribution((4, 0))) is Decision.REJECT_H0

    def test_tie_rejects(self):
        cfg = TestConfig(KL, math.log(2), HALF)
        assert decide(cfg, TypeDistribution((4, 0))) is Decision.REJECT_H0

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            decide(TestConfig(KL, 0.1, HALF), TypeDistribution((1, 1, 1)))

    def test_threshold_must_be_positive(self):
        with pytest.raises(ValidationError):
            TestConfig(KL, 0.0, HALF)


class TestAsymptoticThreshold:
    def test_example(self):
        assert asymptotic_threshold(KL, 2, 1000, 0.05, 0.0) == pytest.approx(0.5 / 1000 * 3.8414588, abs=1e-10)

    def test_margin_equal_to_eps(self):
        with pytest.raises(MarginTooLarge):
            asymptotic_threshold(KL, 2, 100, 0.05, 0.05)

    def test_inverse_n_scaling(self):
        r1 = asymptotic_threshold(KL, 3, 250, 0.1, 0.01)
        assert asymptotic_threshold(KL, 3, 500, 0.1, 0.01) == r1 / 2

    def test_eta_enters(self):
        base = asymptotic_threshold(KL, 3, 100, 0.1)
        assert asymptotic_threshold(DivergenceSpec.chisq(), 3, 100, 0.1) == pytest.approx(2 * base)

    def test_bad_eps(self):
        with pytest.raises(ProbOutOfRange):
            asymptotic_threshold(KL, 2, 100, 1.5)


class TestExactCalibration:
    def test_four_sample_example(self):
        law = null_statistic_law(KL, HALF, 4)
        assert law.values == pytest.approx([0.0, 0.130812, 0.693147], abs=1e-6)
        assert law.masses == pytest.approx([6 / 16, 8 / 16, 2 / 16], abs=1e-15)
        cal = exact_calibrate(KL, HALF, 4, 0.3)
        assert cal.atom == pytest.approx(0.130812, abs=1e-6)
        assert cal.r_star == pytest.approx(0.411979, abs=1e-6)
        assert cal.achieved_type1 == pytest.approx(0.125, abs=1e-14)
        assert cal.mode == "exact"

    def test_large_eps(self):
        cal = exact_calibrate(KL, HALF, 4, 0.99)
        assert cal.r_star == pytest.approx(0.0654, abs=1e-4)
        assert cal.achieved_type1 == pytest.approx(10 / 16, abs=1e-14)

    @pytest.mark.parametrize(
        "spec,p0,n",
        [
            (KL, [0.7, 0.3], 50),
            (KL, [0.5, 0.3, 0.2], 40),
            (DivergenceSpec.alpha_divergence(2.0), [0.5, 0.5], 30),
            (DivergenceSpec.chisq(), [0.2, 0.8], 25),
            (DivergenceSpec.renyi(0.5), [1 / 3, 1 / 3, 1 / 3], 20),
        ],
    )
    @pytest.mark.parametrize("eps", [0.01, 0.05, 0.3])
    def test_level_and_optimality(self, spec, p0, n, eps):
        p0 = make_distribution(p0)
        cal = exact_calibrate(spec, p0, n, eps)
        assert cal.achieved_type1 <= eps
        achieved = type1_exact(TestConfig(spec, cal.r_star, p0), n).value
        assert achieved == pytest.approx(cal.achieved_type1, abs=1e-12)
        law = null_statistic_law(spec, p0, n)
        if cal.atom > law.values[0]:
            # just below d_j the atom at d_j is rejected and the level is violated
            at_atom = type1_exact(TestConfig(spec, cal.atom * (1 - 1e-9), p0), n).value
            assert at_atom > eps

    def test_budget(self):
        with pytest.raises(BudgetExceeded):
            exact_calibrate(KL, make_distribution([0.25] * 4), 1000, 0.05)

    def test_asymptotic_packaging(self):
        cal = calibrate_asymptotic(KL, make_distribution([0.7, 0.3]), 200, 0.05, 0.01)
        assert cal.mode == "asymptotic" and cal.margin_used == 0.01
        assert cal.r_star == asymptotic_threshold(KL, 2, 200, 0.05, 0.01)


class TestExactErrors:
    def test_beta_example(self):
        cfg = TestConfig(KL, 0.411979, HALF)
        beta = type2_exact(cfg, make_distribution([0.7, 0.3]), 4)
        assert beta.value == pytest.approx(0.4116 + 0.2646 + 0.0756, abs=1e-12)
        assert beta.ln_value == pytest.approx(math.log(0.7518), abs=1e-12)

    def test_huge_threshold(self):
        cfg = TestConfig(KL, 1e6, HALF)
        q = make_distribution([0.9, 0.1])
        assert type1_exact(cfg, 12).value == 0.0
        assert type2_exact(cfg, q, 12).value == pytest.approx(1.0, abs=1e-12)

    def test_tiny_threshold(self):
        q = make_distribution([0.9, 0.1])
        cfg = TestConfig(KL, 1e-300, HALF)
        # only the balanced type has statistic 0
        assert type2_exact(cfg, q, 4).value == pytest.approx(6 * 0.81 * 0.01, abs=1e-15)
        assert type2_exact(cfg, q, 5).value == 0.0

    def test_log_space_beta(self):
        p, q = make_distribution([0.7, 0.3]), make_distribution([0.5, 0.5])
        cal = exact_calibrate(KL, p, 3000, 0.05)
        beta = type2_exact(TestConfig(KL, cal.r_star, p), q, 3000)
        assert beta.ln_value < -200
        assert math.isfinite(beta.ln_value)

    def test_monotone_in_threshold(self):
        p, q = make_distribution([0.5, 0.3, 0.2]), make_distribution([0.3, 0.3, 0.4])
        rs = np.linspace(0.001, 0.3, 15)
        a = [type1_exact(TestConfig(KL, r, p), 30).value for r in rs]
        b = [type2_exact(TestConfig(KL, r, p), q, 30).value for r in rs]
        assert np.all(np.diff(a) <= 1e-15)
        assert np.all(np.diff(b) >= -1e-15)


class TestNeymanPearson:
    def test_equal_distributions(self):
        with pytest.raises(EqualDistributions):
            np_exact_calibrate(HALF, HALF, 10, 0.05)

    def test_single_observation(self):
        p0, q = make_distribution([0.6, 0.4]), make_distribution([0.3, 0.7])
        # eps >= P0(symbol 1): reject on the Q-likely symbol, accept the other
        cal = np_exact_calibrate(p0, q, 1, 0.5)
        assert cal.achieved_type1 == pytest.approx(0.4)
        assert np_type2_exact(p0, q, 1, cal.r_star).value == pytest.approx(0.3)
        # eps below that mass: accept everything
        cal = np_exact_calibrate(p0, q, 1, 0.3)
        assert cal.achieved_type1 == 0.0
        assert np_type2_exact(p0, q, 1, cal.r_star).value == pytest.approx(1.0)

    def test_statistic(self):
        p0, q = make_distribution([0.6, 0.4]), make_distribution([0.3, 0.7])
        t = TypeDistribution((2, 3))
        assert np_statistic(t, p0, q) == pytest.approx(2 * math.log(0.5) + 3 * math.log(1.75))

    @pytest.mark.parametrize("eps", [0.01, 0.05, 0.2])
    def test_level(self, eps):
        p0, q = make_distribution([0.5, 0.3, 0.2]), make_distribution([0.2, 0.3, 0.5])
        cal = np_exact_calibrate(p0, q, 40, eps)
        assert cal.achieved_type1 <= eps
        assert np_type1_exact(p0, q, 40, cal.r_star).value == pytest.approx(cal.achieved_type1, abs=1e-12)

    def test_beats_divergence_test(self):
        p, q = make_distribution([0.7, 0.3]), make_distribution([0.5, 0.5])
        n = 400
        cal = exact_calibrate(KL, p, n, 0.05)
        hoeffding = type2_exact(TestConfig(KL, cal.r_star, p), q, n).ln_value
        lrt = np_exact_calibrate(p, q, n, 0.05)
        assert np_type2_exact(p, q, n, lrt.r_star).ln_value < hoeffding


class TestMonteCarlo:
    def test_wilson(self):
        lo, hi = wilson_interval(50, 100)
        assert lo == pytest.approx(0.4038, abs=1e-4) and hi == pytest.approx(0.5962, abs=1e-4)
        assert wilson_interval(0, 10)[0] == 0.0

    def test_deterministic(self):
        cfg = TestConfig(KL, 0.05, make_distribution([0.7, 0.3]))
        a = type1_mc(cfg, 50, 3000, SeededSource(9, 4))
        b = type1_mc(cfg, 50, 3000, SeededSource(9, 4))
        assert a == b

    def test_rejects_zero_trials(self):
        cfg = TestConfig(KL, 0.05, HALF)
        with pytest.raises(ValidationError):
            type1_mc(cfg, 10, 0, SeededSource(1))

    def test_block_boundaries(self):
        # more trials than fit in one block still gives a valid proportion
        cfg = TestConfig(KL, 0.02, HALF)
        est = type2_mc(cfg, make_distribution([0.6, 0.4]), 1000, 2500, SeededSource(5))
        assert 0 <= est.ci_low <= est.estimate <= est.ci_high <= 1

    def test_coverage(self):
        p0 = make_distribution([0.7, 0.3])
        cal = exact_calibrate(KL, p0, 50, 0.05)
        cfg = TestConfig(KL, cal.r_star, p0)
        exact = type1_exact(cfg, 50).value
        hits = sum(type1_mc(cfg, 50, 2000, SeededSource(2024, s)).covers(exact) for s in range(100))
        assert hits >= 93

    def test_type2_agrees_with_exact(self):
        p0, q = make_distribution([0.7, 0.3]), make_distribution([0.5, 0.5])
        cfg = TestConfig(KL, exact_calibrate(KL, p0, 60, 0.05).r_star, p0)
        est = type2_mc(cfg, q, 60, 20_000, SeededSource(77))
        assert est.covers(type2_exact(cfg, q, 60).value)
