"""Second-order predictions of -ln(type-II error) and checks against exact values.

For a divergence test calibrated at type-I level eps,

    -ln beta_n = n D(P||Q) - sqrt(n V(P||Q) q_chi2(k-1, eps)) + O(ln n),

while the likelihood-ratio test achieves n D - sqrt(n V) z(eps) + O(ln n),
with z the upper normal quantile. Since sqrt(q_chi2(k-1, eps)) > z(eps) the
divergence test pays a strictly larger second-order penalty.

Here P is the null and Q the alternative.
"""

from __future__ import annotations

import enum
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .divergences import DivergenceSpec, chi_sq, kl, pq_statistics
from .engine import TestConfig, exact_calibrate, np_exact_calibrate, np_type2_exact, null_statistic_law, type2_exact
from .errors import DegenerateGrid, DimensionMismatch
from .simplex import DEFAULT_TYPE_BUDGET, Distribution, as_probs
from .special import chi2_cdf, chi2_quantile, norm_quantile

__all__ = [
    "Flavor",
    "Expansion",
    "ResidualSeries",
    "Verdict",
    "predict_divergence_test",
    "predict_np",
    "kl_quadratic_approx",
    "berry_esseen_sup",
    "fit_residuals",
    "second_order_series",
    "np_series",
    "residual_verdict",
]


class Flavor(enum.Enum):
    DIVERGENCE_TEST = "divergence_test"
    NEYMAN_PEARSON = "neyman_pearson"


@dataclass(frozen=True)
class Expansion:
    first_order: float
    second_order: float
    predicted_minus_ln_beta: float
    flavor: Flavor


def predict_divergence_test(p: Distribution, q: Distribution, n: int, eps: float,
                            k: int | None = None, dof: int | None = None) -> Expansion:
    """n D - sqrt(n V q_chi2(dof, eps)); ``dof`` defaults to k - 1."""
    st = pq_statistics(p, q)
    k = as_probs(p).shape[0] if k is None else k
    dof = k - 1 if dof is None else dof
    first = n * st.D
    second = -math.sqrt(n * st.V * chi2_quantile(dof, eps))
    return Expansion(first, second, first + second, Flavor.DIVERGENCE_TEST)


def predict_np(p: Distribution, q: Distribution, n: int, eps: float) -> Expansion:
    """n D - sqrt(n V) z(eps), the likelihood-ratio benchmark."""
    st = pq_statistics(p, q)
    first = n * st.D
    second = -math.sqrt(n * st.V) * norm_quantile(eps)
    return Expansion(first, second, first + second, Flavor.NEYMAN_PEARSON)


def kl_quadratic_approx(t, p, q):
    """D(P||Q) + sum (T_i - P_i) ln(P_i/Q_i) + chi_sq(T, P) / 2.

    Second-order expansion of T -> D(T||Q) around T = P; the error is
    O(|T - P|^3).
    """
    pv, qv = as_probs(p), as_probs(q)
    tv = np.asarray(as_probs(t), dtype=float)
    if tv.shape[-1] != pv.shape[0] or qv.shape != pv.shape:
        raise DimensionMismatch("T, P and Q must share one alphabet")
    alphas = np.log(pv / qv)
    out = kl(pv, qv) + (tv - pv) @ alphas + 0.5 * np.asarray(chi_sq(tv, pv))
    return float(out) if np.ndim(out) == 0 else out


def berry_esseen_sup(spec: DivergenceSpec, p0: Distribution, n: int, budget: int = DEFAULT_TYPE_BUDGET) -> float:
    """sup_c |P(n D / eta < c) - F_chi2(k-1)(c)| under P0^n.

    The exact law is discrete, so both one-sided limits are compared at every
    atom; the supremum over all real c is attained there.
    """
    law = null_statistic_law(spec, p0, n, budget)
    c = np.maximum(n * law.values / spec.eta, 0.0)
    below = law.cdf_lt()
    upto = below + law.masses
    f = np.asarray(chi2_cdf(p0.k - 1, c), dtype=float)
    return float(max(np.max(np.abs(below - f)), np.max(np.abs(upto - f))))


@dataclass(frozen=True)
class ResidualSeries:
    n: np.ndarray
    exact: np.ndarray
    predicted: np.ndarray
    residual: np.ndarray
    coef_const: float
    coef_ln: float
    coef_sqrt: float

    @property
    def scaled(self) -> np.ndarray:
        """|R_n| / sqrt(n)."""
        return np.abs(self.residual) / np.sqrt(self.n)


def fit_residuals(n: Sequence[float], exact: Sequence[float], predicted: Sequence[float]) -> ResidualSeries:
    """Least-squares fit of R_n = exact - predicted on {1, ln n, sqrt n}."""
    nv = np.asarray(n, dtype=float)
    ex = np.asarray(exact, dtype=float)
    pr = np.asarray(predicted, dtype=float)
    if nv.ndim != 1 or nv.size < 4:
        raise DegenerateGrid("the residual fit needs at least 4 grid points")
    if ex.shape != nv.shape or pr.shape != nv.shape:
        raise DegenerateGrid("n, exact and predicted must have equal length")
    if np.any(np.diff(nv) <= 0) or nv[0] <= 0:
        raise DegenerateGrid("n must be positive and strictly increasing")
    resid = ex - pr
    basis = np.column_stack([np.ones_like(nv), np.log(nv), np.sqrt(nv)])
    coef, *_ = np.linalg.lstsq(basis, resid, rcond=None)
    return ResidualSeries(nv, ex, pr, resid, float(coef[0]), float(coef[1]), float(coef[2]))


def _map(fn, items, threads: int | None):
    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(fn, items))
    return [fn(x) for x in items]


def second_order_series(spec: DivergenceSpec, p: Distribution, q: Distribution, eps: float,
                        n_grid: Sequence[int], dof: int | None = None, threads: int | None = None,
                        budget: int = DEFAULT_TYPE_BUDGET) -> ResidualSeries:
    """Exactly calibrated divergence test vs its second-order prediction over ``n_grid``.

    ``dof`` overrides the chi-squared degrees of freedom in the prediction
    only (used as a negative control).
    """

    def one(n: int) -> tuple[float, float]:
        cal = exact_calibrate(spec, p, n, eps, budget)
        beta = type2_exact(TestConfig(spec, cal.r_star, p), q, n, budget)
        return -beta.ln_value, predict_divergence_test(p, q, n, eps, dof=dof).predicted_minus_ln_beta

    rows = _map(one, list(n_grid), threads)
    return fit_residuals(list(n_grid), [r[0] for r in rows], [r[1] for r in rows])


def np_series(p: Distribution, q: Distribution, eps: float, n_grid: Sequence[int],
              threads: int | None = None, budget: int = DEFAULT_TYPE_BUDGET) -> list[tuple[int, float, float]]:
    """(n, exact -ln beta, predicted) for the exactly calibrated likelihood-ratio test."""

    def one(n: int) -> tuple[int, float, float]:
        cal = np_exact_calibrate(p, q, n, eps, budget)
        beta = np_type2_exact(p, q, n, cal.r_star, budget)
        return n, -beta.ln_value, predict_np(p, q, n, eps).predicted_minus_ln_beta

    return _map(one, list(n_grid), threads)


@dataclass(frozen=True)
class Verdict:
    passed: bool
    checks: dict[str, bool] = field(default_factory=dict)
    details: dict[str, float] = field(default_factory=dict)


def residual_verdict(series: ResidualSeries, p: Distribution, q: Distribution, eps: float,
                     coef_rel_tol: float = 0.05, shrink: float = 0.25, inversion_tol: float = 0.05) -> Verdict:
    """Judge whether the residual is o(sqrt n) on the grid.

    Three checks: |R_n|/sqrt(n) is nonincreasing apart from at most one rise
    of at most ``inversion_tol`` (relative); the last scaled residual is at
    most ``shrink`` times the first; and the fitted sqrt(n) coefficient is
    within ``coef_rel_tol * sqrt(V q_chi2(k-1, eps))`` of zero.
    """
    st = pq_statistics(p, q)
    scale = math.sqrt(st.V * chi2_quantile(p.k - 1, eps))
    s = series.scaled
    rises = [(s[i + 1] - s[i]) / s[i] if s[i] > 0 else math.inf for i in range(s.size - 1) if s[i + 1] > s[i]]
    checks = {
        "monotone": len(rises) == 0 or (len(rises) == 1 and rises[0] <= inversion_tol),
        "shrinks": bool(s[-1] <= shrink * s[0]),
        "sqrt_coef": bool(abs(series.coef_sqrt) <= coef_rel_tol * scale),
    }
    details = {
        "coef_sqrt": series.coef_sqrt,
        "coef_ln": series.coef_ln,
        "coef_bound": coef_rel_tol * scale,
        "scaled_first": float(s[0]),
        "scaled_last": float(s[-1]),
    }
    return Verdict(all(checks.values()), checks, details)
