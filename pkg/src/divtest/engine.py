"""The divergence test, its calibration, exact and simulated errors.

The test with threshold r accepts H0 (data drawn from P0) iff
D(t || P0) < r, strictly; a statistic equal to r rejects.

Exact quantities are sums of multinomial type-class masses over all
C(n+k-1, k-1) types, streamed block by block. Type-II errors can be far below
the smallest double, so they are accumulated in log space and returned as
``(value, ln_value)`` pairs.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np

from .divergences import DivergenceSpec, pq_statistics
from .errors import DimensionMismatch, MarginTooLarge, ProbOutOfRange, ValidationError
from .simplex import (
    DEFAULT_TYPE_BUDGET,
    Distribution,
    SeededSource,
    TypeDistribution,
    as_probs,
    log_type_class_probs,
    sample_types,
    type_blocks,
)
from .special import chi2_quantile, ln_factorial_table, norm_quantile

__all__ = [
    "Decision",
    "TestConfig",
    "CalibrationResult",
    "ErrorValue",
    "McEstimate",
    "StatisticLaw",
    "decide",
    "asymptotic_threshold",
    "exact_calibrate",
    "type1_exact",
    "type2_exact",
    "type1_mc",
    "type2_mc",
    "np_statistic",
    "np_exact_calibrate",
    "np_type1_exact",
    "np_type2_exact",
    "null_statistic_law",
    "wilson_interval",
    "TIE_TOL",
]

TIE_TOL = 1e-12
_MC_BLOCK_DRAWS = 2_000_000


class Decision(enum.Enum):
    ACCEPT_H0 = "accept"
    REJECT_H0 = "reject"


@dataclass(frozen=True)
class TestConfig:
    """A divergence test: statistic, threshold and the null distribution."""

    __test__ = False  # not a pytest class

    divergence: DivergenceSpec
    threshold_r: float
    null: Distribution

    def __post_init__(self):
        if not self.threshold_r > 0:
            raise ValidationError(f"threshold must be > 0, got {self.threshold_r!r}")


@dataclass(frozen=True)
class CalibrationResult:
    r_star: float
    achieved_type1: float
    mode: str  # "exact" | "asymptotic"
    margin_used: float
    eps: float
    n: int
    atom: float | None = None  # d_j, the largest statistic value still accepted


class ErrorValue(tuple):
    """``(value, ln_value)`` pair; ``ln_value`` stays finite when value underflows."""

    def __new__(cls, value: float, ln_value: float):
        return super().__new__(cls, (float(value), float(ln_value)))

    @property
    def value(self) -> float:
        return self[0]

    @property
    def ln_value(self) -> float:
        return self[1]


@dataclass(frozen=True)
class McEstimate:
    estimate: float
    ci_low: float
    ci_high: float
    hits: int
    trials: int

    def covers(self, value: float) -> bool:
        return self.ci_low <= value <= self.ci_high


@dataclass(frozen=True)
class StatisticLaw:
    """Exact law of a statistic: sorted distinct atoms and their masses."""

    values: np.ndarray
    masses: np.ndarray
    lo: np.ndarray  # smallest raw value merged into each atom
    hi: np.ndarray  # largest raw value merged into each atom

    def tail_gt(self) -> np.ndarray:
        """P(S > values[j]) for each atom j."""
        rev = np.cumsum(self.masses[::-1])[::-1]
        return np.concatenate([rev[1:], [0.0]])

    def cdf_lt(self) -> np.ndarray:
        """P(S < values[j]) for each atom j."""
        return np.concatenate([[0.0], np.cumsum(self.masses)[:-1]])


def _check_eps(eps: float) -> float:
    eps = float(eps)
    if not 0.0 < eps < 1.0:
        raise ProbOutOfRange(f"eps must lie in (0, 1), got {eps!r}")
    return eps


def _check_n(n) -> int:
    if int(n) != n or n < 1:
        raise ValidationError(f"n must be a positive integer, got {n!r}")
    return int(n)


def _check_k(p, q=None) -> int:
    k = as_probs(p).shape[0]
    if q is not None and as_probs(q).shape[0] != k:
        raise DimensionMismatch("P0 and Q live on different alphabets")
    return k


def _logsumexp(x: np.ndarray) -> float:
    if x.size == 0:
        return -math.inf
    m = float(np.max(x))
    if m == -math.inf:
        return -math.inf
    return m + math.log(float(np.sum(np.exp(x - m))))


def _combine_log(parts: list[float]) -> float:
    return _logsumexp(np.asarray(parts, dtype=float))


def _divergence_stat(spec: DivergenceSpec, p0: np.ndarray, n: int) -> Callable[[np.ndarray], np.ndarray]:
    def stat(counts: np.ndarray) -> np.ndarray:
        return np.asarray(spec(counts / float(n), p0), dtype=float)

    return stat


def _np_stat(p0: np.ndarray, q: np.ndarray) -> Callable[[np.ndarray], np.ndarray]:
    llr = np.log(q / p0)

    def stat(counts: np.ndarray) -> np.ndarray:
        return counts @ llr

    return stat


def decide(cfg: TestConfig, t: TypeDistribution) -> Decision:
    """Accept H0 iff D(t/n || P0) < r."""
    if t.k != cfg.null.k:
        raise DimensionMismatch(f"type has k={t.k}, null has k={cfg.null.k}")
    if t.n == 0:
        raise ValidationError("cannot decide on an empty sample")
    value = cfg.divergence(t.probs, cfg.null)
    return Decision.ACCEPT_H0 if value < cfg.threshold_r else Decision.REJECT_H0


def asymptotic_threshold(spec: DivergenceSpec, k: int, n: int, eps: float, margin: float = 0.0) -> float:
    """(eta / n) * chi2_quantile(k - 1, eps - margin).

    ``margin`` absorbs the unknown finite-n error of the chi-squared
    approximation; a positive margin makes the type-I guarantee hold earlier.
    """
    eps = _check_eps(eps)
    n = _check_n(n)
    if margin < 0:
        raise ValidationError("margin must be >= 0")
    if eps - margin <= 0:
        raise MarginTooLarge(f"eps - margin = {eps - margin!r} must be > 0")
    return spec.eta / n * chi2_quantile(k - 1, eps - margin)


def _law(stat: Callable[[np.ndarray], np.ndarray], weights: np.ndarray, k: int, n: int, budget: int) -> StatisticLaw:
    ln_fact = ln_factorial_table(n)
    vals, logw = [], []
    for block in type_blocks(k, n, budget):
        vals.append(stat(block))
        logw.append(log_type_class_probs(block, weights, ln_fact))
    v = np.concatenate(vals)
    w = np.exp(np.concatenate(logw))
    order = np.argsort(v, kind="stable")
    v, w = v[order], w[order]
    with np.errstate(invalid="ignore"):
        gaps = np.diff(v)  # inf - inf is nan, which starts no new group
        scale = np.maximum(1.0, np.abs(v[1:]))
        new_group = gaps > TIE_TOL * scale
    starts = np.concatenate([[0], np.flatnonzero(new_group) + 1])
    ends = np.concatenate([starts[1:], [v.size]])
    masses = np.add.reduceat(w, starts)
    lo = v[starts]
    hi = v[ends - 1]
    return StatisticLaw(values=lo.copy(), masses=masses, lo=lo, hi=hi)


@lru_cache(maxsize=32)
def _divergence_law(spec: DivergenceSpec, p0: Distribution, n: int, budget: int) -> StatisticLaw:
    return _law(_divergence_stat(spec, p0.probs, n), p0.probs, p0.k, n, budget)


@lru_cache(maxsize=32)
def _np_law(p0: Distribution, q: Distribution, n: int, budget: int) -> StatisticLaw:
    return _law(_np_stat(p0.probs, q.probs), p0.probs, p0.k, n, budget)


def null_statistic_law(spec: DivergenceSpec, p0: Distribution, n: int, budget: int = DEFAULT_TYPE_BUDGET) -> StatisticLaw:
    """Exact law of D(t || P0) under P0^n (atoms merged within TIE_TOL)."""
    return _divergence_law(spec, p0, _check_n(n), budget)


def _calibrate(law: StatisticLaw, eps: float, n: int) -> CalibrationResult:
    tail = law.tail_gt()
    j = int(np.argmax(tail <= eps))  # tail is nonincreasing and ends at 0
    d_j = float(law.hi[j])
    if j + 1 < law.values.size:
        nxt = float(law.lo[j + 1])
        r_star = 0.5 * (d_j + nxt) if math.isfinite(nxt) else d_j + 1.0
    else:
        r_star = d_j + 1.0
    return CalibrationResult(
        r_star=r_star,
        achieved_type1=float(tail[j]),
        mode="exact",
        margin_used=0.0,
        eps=eps,
        n=n,
        atom=d_j,
    )


def exact_calibrate(spec: DivergenceSpec, p0: Distribution, n: int, eps: float,
                    budget: int = DEFAULT_TYPE_BUDGET) -> CalibrationResult:
    """Smallest-type-II threshold with exact type-I error <= eps.

    Finds the smallest atom d_j of the null law with P(D > d_j) <= eps and
    returns the midpoint of the gap above it, so the test accepts exactly the
    atoms up to d_j.
    """
    eps = _check_eps(eps)
    n = _check_n(n)
    return _calibrate(null_statistic_law(spec, p0, n, budget), eps, n)


def calibrate_asymptotic(spec: DivergenceSpec, p0: Distribution, n: int, eps: float, margin: float = 0.0,
                         budget: int = DEFAULT_TYPE_BUDGET) -> CalibrationResult:
    """Asymptotic threshold packaged with its exact type-I error."""
    r = asymptotic_threshold(spec, p0.k, n, eps, margin)
    alpha = type1_exact(TestConfig(spec, r, p0), n, budget)
    return CalibrationResult(r_star=r, achieved_type1=alpha.value, mode="asymptotic",
                             margin_used=float(margin), eps=float(eps), n=int(n))


def _region_mass(stat, weights: np.ndarray, k: int, n: int, select, budget: int) -> ErrorValue:
    ln_fact = ln_factorial_table(n)
    parts = []
    for block in type_blocks(k, n, budget):
        mask = select(stat(block))
        if np.any(mask):
            parts.append(_logsumexp(log_type_class_probs(block[mask], weights, ln_fact)))
    ln_v = _combine_log(parts)
    ln_v = min(ln_v, 0.0)
    return ErrorValue(math.exp(ln_v), ln_v)


def type1_exact(cfg: TestConfig, n: int, budget: int = DEFAULT_TYPE_BUDGET) -> ErrorValue:
    """P0^n(D(t || P0) >= r)."""
    n = _check_n(n)
    p0 = cfg.null.probs
    r = cfg.threshold_r
    return _region_mass(_divergence_stat(cfg.divergence, p0, n), p0, p0.shape[0], n, lambda s: ~(s < r), budget)


def type2_exact(cfg: TestConfig, q: Distribution, n: int, budget: int = DEFAULT_TYPE_BUDGET) -> ErrorValue:
    """Q^n(D(t || P0) < r)."""
    n = _check_n(n)
    _check_k(cfg.null, q)
    p0 = cfg.null.probs
    r = cfg.threshold_r
    return _region_mass(_divergence_stat(cfg.divergence, p0, n), as_probs(q), p0.shape[0], n, lambda s: s < r, budget)


def np_statistic(t: TypeDistribution, p0: Distribution, q: Distribution) -> float:
    """Log-likelihood ratio sum_i c_i ln(Q_i / P0_i); large values favour Q."""
    _check_k(p0, q)
    if t.k != p0.k:
        raise DimensionMismatch("type and distributions differ in k")
    return float(_np_stat(as_probs(p0), as_probs(q))(t.as_array().astype(float)))


def np_exact_calibrate(p0: Distribution, q: Distribution, n: int, eps: float,
                       budget: int = DEFAULT_TYPE_BUDGET) -> CalibrationResult:
    """Non-randomised likelihood-ratio test calibrated like :func:`exact_calibrate`.

    H0 is accepted iff the log-likelihood ratio is < r_star. Without boundary
    randomisation the achieved type-I error can sit strictly below eps.
    """
    pq_statistics(p0, q)
    eps = _check_eps(eps)
    n = _check_n(n)
    return _calibrate(_np_law(p0, q, n, budget), eps, n)


def np_type1_exact(p0: Distribution, q: Distribution, n: int, r: float, budget: int = DEFAULT_TYPE_BUDGET) -> ErrorValue:
    n = _check_n(n)
    stat = _np_stat(as_probs(p0), as_probs(q))
    return _region_mass(stat, as_probs(p0), p0.k, n, lambda s: ~(s < r), budget)


def np_type2_exact(p0: Distribution, q: Distribution, n: int, r: float, budget: int = DEFAULT_TYPE_BUDGET) -> ErrorValue:
    n = _check_n(n)
    stat = _np_stat(as_probs(p0), as_probs(q))
    return _region_mass(stat, as_probs(q), p0.k, n, lambda s: s < r, budget)


def wilson_interval(hits: int, trials: int, level: float = 0.95) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion."""
    if trials < 1:
        raise ValidationError("trials must be >= 1")
    z = norm_quantile(0.5 * (1.0 - level))
    phat = hits / trials
    denom = 1.0 + z * z / trials
    centre = (phat + z * z / (2 * trials)) / denom
    half = z * math.sqrt(phat * (1 - phat) / trials + z * z / (4 * trials * trials)) / denom
    return max(0.0, centre - half), min(1.0, centre + half)


def _mc(cfg: TestConfig, sampling: np.ndarray, n: int, trials: int, src: SeededSource, count_reject: bool) -> McEstimate:
    if int(trials) != trials or trials < 1:
        raise ValidationError("trials must be a positive integer")
    n = _check_n(n)
    p0 = cfg.null.probs
    stat = _divergence_stat(cfg.divergence, p0, n)
    rows = max(1, _MC_BLOCK_DRAWS // n)
    hits = 0
    done = 0
    block = 0
    while done < trials:
        m = min(rows, trials - done)
        counts = sample_types(sampling, n, m, src.substream(block).generator())
        accepted = stat(counts) < cfg.threshold_r
        hits += int(np.count_nonzero(~accepted if count_reject else accepted))
        done += m
        block += 1
    lo, hi = wilson_interval(hits, trials)
    return McEstimate(hits / trials, lo, hi, hits, int(trials))


def type1_mc(cfg: TestConfig, n: int, trials: int, src: SeededSource) -> McEstimate:
    """Monte Carlo type-I error with a 95% Wilson interval."""
    return _mc(cfg, cfg.null.probs, n, trials, src, count_reject=True)


def type2_mc(cfg: TestConfig, q: Distribution, n: int, trials: int, src: SeededSource) -> McEstimate:
    """Monte Carlo type-II error with a 95% Wilson interval."""
    _check_k(cfg.null, q)
    return _mc(cfg, as_probs(q), n, trials, src, count_reject=False)
