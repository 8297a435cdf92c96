"""Minimising the linear functional ell over a chi-squared ball, and rounding to a type.

For P != Q with log-ratios alpha_i = ln(P_i/Q_i) and D = D(P||Q), the problem

    minimise  ell(G) = sum_i (G_i - P_i) alpha_i
    subject to  sum_i G_i = 1,  chi_sq(G, P) <= r

has the closed-form solution G*_i = P_i + sqrt(r) (D - alpha_i) P_i / sqrt(V)
with value -sqrt(V r), valid while every G*_i stays positive.
:func:`round_to_type` then moves G* to a nearby lattice point with
denominator n while staying inside the ball and within a bounded ell-gap.

Indices are 0-based throughout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .divergences import EQUALITY_TOL, chi_sq, pq_statistics
from .errors import BudgetExceeded, DimensionMismatch, NTooSmall, RadiusTooLarge, ValidationError
from .simplex import Distribution, TypeDistribution, as_probs

__all__ = [
    "KktSolution",
    "RoundedType",
    "FeasibilityData",
    "ell",
    "feasibility_data",
    "kkt_minimize",
    "brute_force_min",
    "round_to_type",
    "kappa_of",
    "rounding_checks",
    "ZERO_TOL",
]

ZERO_TOL = 1e-12
BRUTE_FORCE_BUDGET = 50_000_000


@dataclass(frozen=True)
class FeasibilityData:
    tau: float
    index_set_I: frozenset[int]
    value_set_B: tuple[float, ...]


@dataclass(frozen=True)
class KktSolution:
    gamma_star: Distribution
    min_value: float
    r_tilde: float
    tau: float
    index_set_I: frozenset[int]
    value_set_B: tuple[float, ...]
    lambda0: float
    mu: float


@dataclass(frozen=True)
class RoundedType:
    t_star: TypeDistribution
    kappa_bound: float
    ell_gap: float
    permutation: tuple[int, ...]  # permutation[j] = original index at canonical position j
    case: int
    m: int
    c_prime: float


def ell(gamma, p, alphas) -> float:
    """sum_i (gamma_i - P_i) alpha_i."""
    g = np.asarray(as_probs(gamma), dtype=float)
    pv = as_probs(p)
    a = np.asarray(alphas, dtype=float)
    if g.shape[-1] != pv.shape[0] or a.shape != pv.shape:
        raise DimensionMismatch("gamma, P and alphas must share one alphabet")
    out = (g - pv) @ a
    return float(out) if np.ndim(out) == 0 else out


def feasibility_data(p: Distribution, q: Distribution) -> FeasibilityData:
    """I = {i : alpha_i > D}, B = {alpha_i - D : i in I}, tau = max B."""
    st = pq_statistics(p, q)
    gaps = st.alphas - st.D
    idx = [int(i) for i in np.flatnonzero(gaps > 0)]
    values = tuple(float(gaps[i]) for i in idx)
    return FeasibilityData(tau=max(values), index_set_I=frozenset(idx), value_set_B=values)


def kkt_minimize(p: Distribution, q: Distribution, r_tilde: float) -> KktSolution:
    """Closed-form minimiser of ell over the chi-squared ball of radius ``r_tilde``."""
    st = pq_statistics(p, q)
    feas = feasibility_data(p, q)
    if not r_tilde > 0:
        raise ValidationError(f"r_tilde must be > 0, got {r_tilde!r}")
    root_r = math.sqrt(r_tilde)
    limit = math.sqrt(st.V) / feas.tau
    if not root_r < limit:
        raise RadiusTooLarge(f"sqrt(r_tilde) = {root_r:.6g} must be < sqrt(V)/tau = {limit:.6g}")
    pv = as_probs(p)
    gamma = pv + root_r * (st.D - st.alphas) * pv / math.sqrt(st.V)
    return KktSolution(
        gamma_star=Distribution(gamma),
        min_value=-math.sqrt(st.V * r_tilde),
        r_tilde=float(r_tilde),
        tau=feas.tau,
        index_set_I=feas.index_set_I,
        value_set_B=feas.value_set_B,
        lambda0=math.sqrt(st.V) / (2.0 * root_r),
        mu=-st.D,
    )


def brute_force_min(p: Distribution, q: Distribution, r_tilde: float, grid_step: float,
                    budget: int = BRUTE_FORCE_BUDGET) -> tuple[float, np.ndarray]:
    """Minimum of ell over simplex lattice points (spacing ``grid_step``) in the ball.

    The first k-2 coordinates are scanned over the ball's bounding box. With
    those fixed, the remaining pair moves along a line on which ell is affine
    and the ball is an interval, so the best lattice point is the one nearest
    an end of that interval; taking it is equivalent to scanning the line.
    Ties go to the lexicographically smallest point.
    """
    pv = as_probs(p)
    k = pv.shape[0]
    if k > 4:
        raise ValidationError("brute_force_min supports k <= 4")
    if not 0 < grid_step <= 0.1:
        raise ValidationError("grid_step must lie in (0, 0.1]")
    big_n = round(1.0 / grid_step)
    if abs(big_n * grid_step - 1.0) > 1e-9:
        raise ValidationError("1 / grid_step must be an integer")
    if r_tilde < 0:
        raise ValidationError("r_tilde must be >= 0")
    alphas = pq_statistics(p, q).alphas

    # bounding box: |G_i - P_i| <= sqrt(r P_i (1 - P_i)) on the ball
    half = np.sqrt(r_tilde * pv * (1.0 - pv))
    lo = np.maximum(0, np.ceil((pv - half) * big_n - 1e-9)).astype(np.int64)
    hi = np.minimum(big_n, np.floor((pv + half) * big_n + 1e-9)).astype(np.int64)
    ranges = [np.arange(lo[i], hi[i] + 1) for i in range(k - 2)]
    size = int(np.prod([r.size for r in ranges])) if ranges else 1
    if size > budget:
        raise BudgetExceeded(f"{size} lattice slabs exceed the budget of {budget}")
    if ranges:
        mesh = np.stack(np.meshgrid(*ranges, indexing="ij"), axis=-1).reshape(-1, k - 2)
    else:
        mesh = np.zeros((1, 0), dtype=np.int64)

    head = mesh / big_n
    rest_units = big_n - mesh.sum(axis=1)
    rest = rest_units / big_n
    head_chi = ((head - pv[: k - 2]) ** 2 / pv[: k - 2]).sum(axis=1)
    # x = G_{k-2}, G_{k-1} = rest - x; chi^2 is a x^2 + b x + c
    pa, pb = pv[k - 2], pv[k - 1]
    a = 1.0 / pa + 1.0 / pb
    b = -2.0 * (1.0 + (rest - pb) / pb)
    c = head_chi + pa + (rest - pb) ** 2 / pb - r_tilde
    disc = b * b - 4 * a * c
    ok = (disc >= -1e-12) & (rest_units >= 0)
    root = np.sqrt(np.where(disc > 0, disc, 0.0))
    x_lo = (-b - root) / (2 * a)
    x_hi = (-b + root) / (2 * a)
    j_lo = np.maximum(np.ceil(x_lo * big_n - 1e-9), 0).astype(np.int64)
    j_hi = np.minimum(np.floor(x_hi * big_n + 1e-9), rest_units).astype(np.int64)
    ok &= j_lo <= j_hi
    if not np.any(ok):
        raise ValidationError("no lattice point lies inside the ball; refine grid_step")

    def chi_of(j):
        x = j / big_n
        return head_chi + (x - pa) ** 2 / pa + (rest - x - pb) ** 2 / pb

    # pull the candidate endpoints inside the ball if rounding put them just outside
    tol = 1e-14
    for _ in range(2):
        bad = ok & (chi_of(j_lo) > r_tilde + tol)
        j_lo = np.where(bad, j_lo + 1, j_lo)
        bad = ok & (chi_of(j_hi) > r_tilde + tol)
        j_hi = np.where(bad, j_hi - 1, j_hi)
        ok &= j_lo <= j_hi
    slope = alphas[k - 2] - alphas[k - 1]
    j_best = j_lo if slope >= 0 else j_hi
    head_ell = (head - pv[: k - 2]) @ alphas[: k - 2] if k > 2 else np.zeros(mesh.shape[0])
    x = j_best / big_n
    values = head_ell + (x - pa) * alphas[k - 2] + (rest - x - pb) * alphas[k - 1]
    values = np.where(ok, values, np.inf)
    best = int(np.argmin(values))
    point = np.concatenate([mesh[best], [j_best[best], rest_units[best] - j_best[best]]]) / big_n
    return float(values[best]), point


def kappa_of(p, alphas, c_prime: float, k: int, case: int) -> float:
    """ell-gap bound of the rounding step, in canonical (permuted) coordinates."""
    pv = as_probs(p)
    a = np.abs(np.asarray(alphas, dtype=float))
    head = float(a[: k - 2].sum())
    if case == 1:
        s = c_prime * pv[k - 2]
        return head + a[k - 2] * (s + 1.0) + a[k - 1] * (s + k - 1.0)
    if case == 2:
        s = c_prime * pv[k - 1]
        return head + a[k - 2] * (s + k - 1.0) + a[k - 1] * (s + 1.0)
    raise ValidationError(f"case must be 1 or 2, got {case!r}")


def _canonical_order(weights: np.ndarray) -> tuple[tuple[int, ...], int]:
    zero = [i for i in range(weights.size) if abs(weights[i]) <= ZERO_TOL]
    neg = [i for i in range(weights.size) if weights[i] < -ZERO_TOL]
    pos = [i for i in range(weights.size) if weights[i] > ZERO_TOL]
    last_neg = min(neg, key=lambda i: (weights[i], i))
    last_pos = max(pos, key=lambda i: (weights[i], -i))
    middle = [i for i in range(weights.size) if i not in zero and i not in (last_neg, last_pos)]
    return tuple(zero + middle + [last_neg, last_pos]), len(zero)


def round_to_type(p: Distribution, q: Distribution, n: int, r_bar: float) -> RoundedType:
    """Round the ball minimiser to a type with denominator n.

    The alphabet is first relabelled so that the coordinates where G* = P come
    first, followed by the rest, then the most negative and the most positive
    (D - alpha_i) P_i. The rounding runs in that order and the result is
    mapped back to the original labels.
    """
    if int(n) != n or n < 1:
        raise ValidationError("n must be a positive integer")
    n = int(n)
    sol = kkt_minimize(p, q, r_bar)
    st = pq_statistics(p, q)
    pv = as_probs(p)
    k = pv.shape[0]
    perm, m = _canonical_order((st.D - st.alphas) * pv)
    order = np.asarray(perm)
    P = pv[order]
    G = sol.gamma_star.probs[order]
    A = st.alphas[order]

    c_prime = float(np.sum(1.0 / P[:m]))
    need = c_prime + k
    dev = np.abs(G[m:] - P[m:])
    if np.any(n * dev < need):
        min_n = math.ceil(need / float(dev.min()))
        raise NTooSmall(f"n = {n} is too small for rounding; need n >= {min_n}", min_n)

    nG = n * G
    counts = np.zeros(k, dtype=np.int64)
    counts[:m] = np.floor(n * P[:m])
    for i in range(m, k - 2):
        counts[i] = math.ceil(nG[i]) if nG[i] - n * P[i] < 0 else math.floor(nG[i])
    gamma = float(np.sum(nG[: k - 2] - counts[: k - 2]))
    if gamma <= 0:
        case = 1
        counts[k - 2] = math.ceil(nG[k - 2] + c_prime * P[k - 2])
        counts[k - 1] = n - counts[: k - 1].sum()
    else:
        case = 2
        counts[k - 1] = math.floor(nG[k - 1] - c_prime * P[k - 1])
        counts[k - 2] = n - counts[: k - 2].sum() - counts[k - 1]

    original = np.empty(k, dtype=np.int64)
    original[order] = counts
    t_star = TypeDistribution(tuple(original.tolist()))
    gap = abs(n * sol.min_value - n * ell(t_star.probs, pv, st.alphas))
    return RoundedType(
        t_star=t_star,
        kappa_bound=float(kappa_of(P, A, c_prime, k, case)),
        ell_gap=float(gap),
        permutation=perm,
        case=case,
        m=m,
        c_prime=c_prime,
    )


def rounding_checks(p: Distribution, rounded: RoundedType, n: int, r_bar: float) -> dict[str, bool]:
    """The three guarantees of the rounding step as named booleans."""
    t = rounded.t_star
    return {
        "sums_to_n": t.n == n and all(c >= 0 for c in t.counts),
        "inside_ball": bool(chi_sq(t.probs, p) <= r_bar * (1.0 + EQUALITY_TOL)),
        "gap_within_kappa": bool(rounded.ell_gap <= rounded.kappa_bound),
    }
