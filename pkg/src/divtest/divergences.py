"""Divergence functionals on a finite alphabet.

Argument order
--------------
Every function takes the *empirical* (or test) point first and the reference
distribution second: ``div(T, P)`` is the divergence of T from P, matching the
test statistic D(t || P). For :func:`f_div` this means

    f_div(f, T, P) = sum_i P_i * f(T_i / P_i),

i.e. the reference P sits in the weighting slot. With ``f(u) = u ln u`` this is
KL(T || P). For an asymmetric ``f`` swapping the arguments changes the value,
so pass them in this order.

Conventions
-----------
All logarithms are natural (nats). The first argument may sit on the closed
simplex; the second must be strictly positive. Zero entries of the first
argument use the continuous extension: ``0 ln 0 = 0``, ``0**a = 0`` for a > 0
and ``0**a = +inf`` for a < 0. The last case makes the alpha-divergence with
alpha > 1 equal to +inf at types with an empty cell, which is its limit value.

All functions accept a single point of shape ``(k,)`` or a stack of points of
shape ``(m, k)``; results are floats or ``(m,)`` arrays accordingly.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import DimensionMismatch, EqualDistributions, InvalidAlpha, ValidationError
from .simplex import TypeDistribution, as_probs

__all__ = [
    "DivergenceSpec",
    "PqStatistics",
    "kl",
    "f_div",
    "alpha_div",
    "renyi",
    "chi_sq",
    "eta_of",
    "pq_statistics",
    "power_div_statistic",
    "EQUALITY_TOL",
]

EQUALITY_TOL = 1e-12


def _pair(t, p) -> tuple[np.ndarray, np.ndarray]:
    tv = np.asarray(as_probs(t), dtype=float)
    pv = np.asarray(as_probs(p), dtype=float)
    if pv.ndim != 1:
        raise DimensionMismatch("reference distribution must be a 1-d vector")
    if tv.shape[-1] != pv.shape[0]:
        raise DimensionMismatch(f"alphabet sizes differ: {tv.shape[-1]} vs {pv.shape[0]}")
    return tv, pv


def _out(values: np.ndarray):
    return float(values) if np.ndim(values) == 0 else values


def _pow0(x: np.ndarray, a: float) -> np.ndarray:
    """x**a for x >= 0 with the limits at x = 0 described in the module doc."""
    pos = x > 0
    if a > 0:
        zero_val = 0.0
    elif a < 0:
        zero_val = np.inf
    else:
        zero_val = 1.0
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(pos, np.power(np.where(pos, x, 1.0), a), zero_val)


def _xlogx_over(t: np.ndarray, p: np.ndarray) -> np.ndarray:
    pos = t > 0
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(pos, t * np.log(np.where(pos, t, 1.0) / p), 0.0)


def kl(t, p):
    """Kullback-Leibler divergence D(T || P) in nats."""
    tv, pv = _pair(t, p)
    return _out(_xlogx_over(tv, pv).sum(axis=-1))


def f_div(f: Callable[[np.ndarray], np.ndarray], t, p):
    """sum_i P_i f(T_i / P_i); see the module docstring for argument order."""
    tv, pv = _pair(t, p)
    return _out((pv * f(tv / pv)).sum(axis=-1))


def _check_alpha_div(alpha: float) -> float:
    alpha = float(alpha)
    if not np.isfinite(alpha) or abs(alpha) == 1.0:
        raise InvalidAlpha(f"alpha-divergence is undefined at alpha = {alpha!r}")
    return alpha


def alpha_div(alpha: float, t, p):
    """(4 / (1 - a^2)) * [1 - sum T_i^((1-a)/2) P_i^((1+a)/2)]."""
    alpha = _check_alpha_div(alpha)
    tv, pv = _pair(t, p)
    s = (_pow0(tv, 0.5 * (1.0 - alpha)) * pv ** (0.5 * (1.0 + alpha))).sum(axis=-1)
    with np.errstate(invalid="ignore"):
        return _out(4.0 / (1.0 - alpha * alpha) * (1.0 - s))


def _check_renyi(alpha: float) -> float:
    alpha = float(alpha)
    if not np.isfinite(alpha) or alpha <= 0 or alpha == 1.0:
        raise InvalidAlpha(f"Renyi order must be > 0 and != 1, got {alpha!r}")
    return alpha


def renyi(alpha: float, t, p):
    """Renyi divergence of order alpha: ln(sum T^a P^(1-a)) / (a - 1)."""
    alpha = _check_renyi(alpha)
    tv, pv = _pair(t, p)
    s = (_pow0(tv, alpha) * pv ** (1.0 - alpha)).sum(axis=-1)
    return _out(np.log(s) / (alpha - 1.0))


def chi_sq(t, p):
    """Pearson chi-squared divergence sum (T_i - P_i)^2 / P_i."""
    tv, pv = _pair(t, p)
    return _out(((tv - pv) ** 2 / pv).sum(axis=-1))


_KINDS = ("kl", "alpha", "renyi", "chisq", "f")


@dataclass(frozen=True)
class DivergenceSpec:
    """Which divergence a test uses, plus its quadratic coefficient eta.

    Build one with the classmethods rather than the raw constructor.
    """

    kind: str
    alpha: float | None = None
    f: Callable[[np.ndarray], np.ndarray] | None = field(default=None, compare=False)
    f_second_at_1: float | None = None
    label: str | None = None

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValidationError(f"unknown divergence kind {self.kind!r}")
        if self.kind == "alpha":
            _check_alpha_div(self.alpha)
        elif self.kind == "renyi":
            _check_renyi(self.alpha)
        elif self.kind == "f":
            _check_generic_f(self.f, self.f_second_at_1)

    @classmethod
    def kl(cls) -> "DivergenceSpec":
        return cls("kl")

    @classmethod
    def alpha_divergence(cls, alpha: float) -> "DivergenceSpec":
        return cls("alpha", alpha=float(alpha))

    @classmethod
    def renyi(cls, alpha: float) -> "DivergenceSpec":
        return cls("renyi", alpha=float(alpha))

    @classmethod
    def chisq(cls) -> "DivergenceSpec":
        return cls("chisq")

    @classmethod
    def generic_f(cls, f, f_second_at_1: float, label: str = "f") -> "DivergenceSpec":
        return cls("f", f=f, f_second_at_1=float(f_second_at_1), label=label)

    @property
    def eta(self) -> float:
        return eta_of(self)

    @property
    def name(self) -> str:
        if self.kind in ("alpha", "renyi"):
            return f"{self.kind}({self.alpha:g})"
        if self.kind == "f":
            return self.label or "f"
        return self.kind

    @property
    def chi2_rate_established(self) -> bool:
        """Whether an n^-1/2 chi-squared approximation of the null law is known.

        True for KL and alpha-divergences (power-divergence family) and for the
        Pearson statistic; not established for Renyi or arbitrary f.
        """
        return self.kind in ("kl", "alpha", "chisq")

    def __call__(self, t, p):
        if self.kind == "kl":
            return kl(t, p)
        if self.kind == "alpha":
            return alpha_div(self.alpha, t, p)
        if self.kind == "renyi":
            return renyi(self.alpha, t, p)
        if self.kind == "chisq":
            return chi_sq(t, p)
        return f_div(self.f, t, p)


def _check_generic_f(f, f2) -> None:
    if f is None or not callable(f):
        raise ValidationError("generic f-divergence needs a callable f")
    if f2 is None or not f2 > 0:
        raise ValidationError("generic f-divergence needs f''(1) > 0")
    probe = np.array([0.5, 1.0, 2.0])
    vals = np.asarray(f(probe), dtype=float)
    if abs(vals[1]) > 1e-12:
        raise ValidationError(f"f(1) must be 0, got {vals[1]!r}")
    # midpoint convexity on (0.5, 2) and its two halves
    pairs = ((0.5, 2.0), (0.5, 1.0), (1.0, 2.0))
    for a, b in pairs:
        fa, fb, fm = (float(np.asarray(f(np.array([x])))[0]) for x in (a, b, 0.5 * (a + b)))
        if fm > 0.5 * (fa + fb) + 1e-12:
            raise ValidationError("f fails the midpoint convexity check")


def eta_of(spec: DivergenceSpec) -> float:
    """Coefficient eta with D(T||P) = eta * chi_sq(T, P) + O(|T - P|^3)."""
    if spec.kind in ("kl", "alpha"):
        return 0.5
    if spec.kind == "renyi":
        return 0.5 * spec.alpha
    if spec.kind == "chisq":
        return 1.0
    return 0.5 * spec.f_second_at_1


@dataclass(frozen=True)
class PqStatistics:
    """D(P||Q), the divergence variance V(P||Q) and log-ratios ln(P_i/Q_i)."""

    D: float
    V: float
    alphas: np.ndarray


def pq_statistics(p, q) -> PqStatistics:
    pv, qv = _pair(p, q)
    if pv.ndim != 1:
        raise DimensionMismatch("pq_statistics takes two single distributions")
    if np.max(np.abs(pv - qv)) <= EQUALITY_TOL:
        raise EqualDistributions("P and Q coincide; the second-order quantities are undefined")
    alphas = np.log(pv / qv)
    d = float(np.dot(pv, alphas))
    v = float(np.dot(pv, (alphas - d) ** 2))
    if not v > 0:
        raise EqualDistributions("V(P||Q) vanished numerically")
    alphas.setflags(write=False)
    return PqStatistics(D=d, V=v, alphas=alphas)


def power_div_statistic(lam: float, t, p):
    """Cressie-Read power-divergence statistic T_lambda of observed counts.

    ``t`` is a TypeDistribution or an integer count array (``(k,)`` or
    ``(m, k)``). lambda = 0 and lambda = -1 use their limit forms.
    """
    counts = t.as_array() if isinstance(t, TypeDistribution) else np.asarray(t)
    y, pv = _pair(counts.astype(float), p)
    expected = y.sum(axis=-1, keepdims=True) * pv
    lam = float(lam)
    if lam == 0.0:
        return _out(2.0 * _xlogx_over(y, expected).sum(axis=-1))
    pos = y > 0
    safe_y = np.where(pos, y, 1.0)
    if lam == -1.0:
        terms = np.where(pos, expected * np.log(expected / safe_y), np.inf)
        return _out(2.0 * terms.sum(axis=-1))
    # Y (Y/E)^lam at Y = 0 is 0 when 1 + lam > 0 and +inf when 1 + lam < 0
    zero_val = 0.0 if lam > -1.0 else np.inf
    core = np.where(pos, safe_y * (safe_y / expected) ** lam, zero_val)
    return _out(2.0 / (lam * (lam + 1.0)) * (core - y).sum(axis=-1))
