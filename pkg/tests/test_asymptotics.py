import math

import numpy as np
import pytest

from divtest.asymptotics import (
    Flavor,
    berry_esseen_sup,
    fit_residuals,
    kl_quadratic_approx,
    predict_divergence_test,
    predict_np,
    residual_verdict,
    second_order_series,
)
from divtest.divergences import DivergenceSpec, kl
from divtest.errors import DegenerateGrid, DimensionMismatch, EqualDistributions
from divtest.simplex import make_distribution

from conftest import random_interior


class TestPredictors:
    def test_divergence_test_example(self, p_flag, q_flag):
        e = predict_divergence_test(p_flag, q_flag, 1000, 0.05)
        assert e.first_order == pytest.approx(82.2829, abs=1e-4)
        assert e.second_order == pytest.approx(-24.0655, abs=1e-4)
        assert e.predicted_minus_ln_beta == pytest.approx(58.2174, abs=1e-4)
        assert e.flavor is Flavor.DIVERGENCE_TEST

    def test_np_example(self, p_flag, q_flag):
        e = predict_np(p_flag, q_flag, 1000, 0.05)
        assert e.second_order == pytest.approx(-20.1963, abs=1e-4)
        assert e.predicted_minus_ln_beta == pytest.approx(62.0866, abs=1e-4)

    def test_np_median(self, p_flag, q_flag):
        assert predict_np(p_flag, q_flag, 500, 0.5).second_order == 0.0

    def test_second_order_vanishes_near_one(self, p_flag, q_flag):
        terms = [predict_divergence_test(p_flag, q_flag, 100, e).second_order for e in (0.9, 0.99, 0.999999)]
        assert all(t < 0 for t in terms)
        assert terms[0] < terms[1] < terms[2] and terms[2] > -0.01

    def test_sqrt_n_scaling(self, p_flag, q_flag):
        a = predict_divergence_test(p_flag, q_flag, 250, 0.1).second_order
        assert predict_divergence_test(p_flag, q_flag, 1000, 0.1).second_order == pytest.approx(2 * a, rel=1e-15)

    def test_equal_distributions(self, q_flag):
        with pytest.raises(EqualDistributions):
            predict_np(q_flag, q_flag, 10, 0.05)

    def test_divergence_test_pays_more(self, rng):
        for _ in range(40):
            k = int(rng.integers(2, 6))
            p, q = random_interior(rng, k), random_interior(rng, k)
            n = int(rng.integers(10, 10_000))
            for eps in (0.01, 0.05, 0.2, 0.5):
                div = predict_divergence_test(p, q, n, eps)
                lrt = predict_np(p, q, n, eps)
                assert div.predicted_minus_ln_beta < lrt.predicted_minus_ln_beta
                assert abs(div.second_order) > abs(lrt.second_order)


class TestQuadraticApprox:
    def test_at_p(self, p_flag, q_flag):
        assert kl_quadratic_approx(p_flag.probs, p_flag, q_flag) == kl(p_flag, q_flag)

    def test_worked_example(self, p_flag, q_flag):
        approx = kl_quadratic_approx([0.75, 0.25], p_flag, q_flag)
        assert approx == pytest.approx(0.1306002, abs=1e-7)
        exact = kl([0.75, 0.25], q_flag)
        assert exact == pytest.approx(0.1308120359411370, abs=1e-15)  # 30-digit evaluation
        assert exact - approx == pytest.approx(2.118834643e-4, abs=1e-12)
        assert exact - approx <= 10 * (0.05 * math.sqrt(2)) ** 3

    def test_cubic_remainder(self, rng):
        for _ in range(10):
            k = int(rng.integers(2, 5))
            p, q = random_interior(rng, k, 0.1), random_interior(rng, k, 0.1)
            v = rng.normal(size=k)
            v -= v.mean()
            v /= np.linalg.norm(v)
            steps = np.array([1e-2, 1e-3, 1e-4])
            rem = [abs(kl(p.probs + s * v, q) - kl_quadratic_approx(p.probs + s * v, p, q)) for s in steps]
            assert np.polyfit(np.log(steps), np.log(rem), 1)[0] >= 2.9

    def test_dimension_check(self, p_flag, q_flag):
        with pytest.raises(DimensionMismatch):
            kl_quadratic_approx([0.2, 0.3, 0.5], p_flag, q_flag)


class TestBerryEsseen:
    def test_single_observation(self):
        # both types have statistic ln 2, so n D / eta = 2 ln 2 is the only atom
        f = math.erf(math.sqrt(math.log(2)))
        sup = berry_esseen_sup(DivergenceSpec.kl(), make_distribution([0.5, 0.5]), 1)
        assert sup == pytest.approx(max(f, 1 - f), abs=1e-14)

    def test_sqrt_n_band_kl(self):
        grid = [50, 200, 800, 3200]
        vals = [math.sqrt(n) * berry_esseen_sup(DivergenceSpec.kl(), make_distribution([0.5, 0.5]), n) for n in grid]
        assert max(vals) / min(vals) <= 3

    def test_pearson(self):
        grid = [50, 200, 800, 3200]
        p0 = make_distribution([0.5, 0.5])
        vals = [math.sqrt(n) * berry_esseen_sup(DivergenceSpec.chisq(), p0, n) for n in grid]
        assert max(vals) / min(vals) <= 3

    def test_shrinks(self):
        p0 = make_distribution([0.5, 0.3, 0.2])
        assert berry_esseen_sup(DivergenceSpec.kl(), p0, 400) < berry_esseen_sup(DivergenceSpec.kl(), p0, 25)


class TestResidualFit:
    grid = np.array([100, 316, 1000, 3162, 10000], dtype=float)

    def test_log_residual(self):
        s = fit_residuals(self.grid, 3 * np.log(self.grid), np.zeros(5))
        assert abs(s.coef_sqrt) <= 1e-8
        assert s.coef_ln == pytest.approx(3, abs=1e-8)

    def test_sqrt_residual(self):
        s = fit_residuals(self.grid, 5 + 0.5 * np.sqrt(self.grid), np.zeros(5))
        assert s.coef_sqrt == pytest.approx(0.5, abs=1e-10)

    def test_residual_is_difference(self):
        s = fit_residuals(self.grid, np.arange(5.0), np.ones(5))
        assert np.array_equal(s.residual, np.arange(5.0) - 1)

    @pytest.mark.parametrize(
        "n", [[100, 200, 300], [100, 100, 200, 300], [300, 200, 100, 50], [0, 1, 2, 3]]
    )
    def test_degenerate(self, n):
        with pytest.raises(DegenerateGrid):
            fit_residuals(n, np.zeros(len(n)), np.zeros(len(n)))


class TestPipeline:
    grid = [100, 316, 1000, 3162, 10000]

    def test_flagship_passes(self, p_flag, q_flag):
        series = second_order_series(DivergenceSpec.kl(), p_flag, q_flag, 0.05, self.grid)
        verdict = residual_verdict(series, p_flag, q_flag, 0.05)
        assert verdict.passed, verdict
        assert abs(series.coef_sqrt) <= 0.038

    def test_wrong_dof_fails(self, p_flag, q_flag):
        series = second_order_series(DivergenceSpec.kl(), p_flag, q_flag, 0.05, self.grid, dof=2)
        assert not residual_verdict(series, p_flag, q_flag, 0.05).passed

    def test_threads_match_serial(self, p_flag, q_flag):
        grid = [50, 100, 200, 400]
        a = second_order_series(DivergenceSpec.kl(), p_flag, q_flag, 0.1, grid)
        b = second_order_series(DivergenceSpec.kl(), p_flag, q_flag, 0.1, grid, threads=3)
        assert np.array_equal(a.exact, b.exact)
