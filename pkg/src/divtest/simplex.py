"""Finite-alphabet distributions, empirical types and exact multinomial masses.

Symbols are 0-based integers ``0..k-1`` throughout the package.

Random numbers come from numpy's Philox4x64 counter-based generator keyed by
``SeedSequence(seed, spawn_key=(stream_id,))``. Changing the generator family
changes every Monte Carlo number the package produces, so it is fixed here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

from .errors import (
    BudgetExceeded,
    DimensionMismatch,
    NonPositiveEntry,
    NotNormalized,
    SymbolOutOfRange,
    ValidationError,
)
from .special import ln_factorial_table

__all__ = [
    "Distribution",
    "TypeDistribution",
    "SeededSource",
    "make_distribution",
    "empirical_type",
    "enumerate_types",
    "num_types",
    "type_blocks",
    "type_array",
    "log_type_class_prob",
    "log_type_class_probs",
    "sample_type",
    "sample_types",
    "DEFAULT_TYPE_BUDGET",
]

NORMALIZATION_TOL = 1e-12
DEFAULT_TYPE_BUDGET = 10_000_000


def _frozen(values, dtype) -> np.ndarray:
    arr = np.array(values, dtype=dtype)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Distribution:
    """Strictly positive probability vector on ``k >= 2`` symbols."""

    probs: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "probs", _frozen(self.probs, float))

    @property
    def k(self) -> int:
        return int(self.probs.shape[0])

    def __len__(self) -> int:
        return self.k

    def __array__(self, dtype=None, copy=None):
        return self.probs if dtype is None else self.probs.astype(dtype)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Distribution):
            return NotImplemented
        return self.k == other.k and bool(np.array_equal(self.probs, other.probs))

    def __hash__(self) -> int:
        return hash(tuple(self.probs.tolist()))

    def __repr__(self) -> str:
        return f"Distribution({self.probs.tolist()})"


def make_distribution(weights: Sequence[float]) -> Distribution:
    """Validate ``weights`` as a distribution. Never renormalizes."""
    w = np.asarray(weights, dtype=float)
    if w.ndim != 1 or w.shape[0] < 2:
        raise ValidationError("a distribution needs a 1-d vector of length >= 2")
    if not np.all(np.isfinite(w)):
        raise ValidationError("weights must be finite")
    if np.any(w <= 0):
        bad = int(np.flatnonzero(w <= 0)[0])
        raise NonPositiveEntry(f"weight {bad} is {w[bad]!r}; all weights must be > 0")
    total = math.fsum(w.tolist())
    if abs(total - 1.0) > NORMALIZATION_TOL:
        raise NotNormalized(f"weights sum to {total!r}, not 1 (tol {NORMALIZATION_TOL})")
    return Distribution(w)


def as_probs(dist) -> np.ndarray:
    """Probability array of a Distribution or array-like."""
    if isinstance(dist, Distribution):
        return dist.probs
    return np.asarray(dist, dtype=float)


@dataclass(frozen=True)
class TypeDistribution:
    """Empirical type of an n-length sequence, stored as integer counts."""

    counts: tuple[int, ...]

    def __post_init__(self):
        counts = tuple(int(c) for c in self.counts)
        if len(counts) < 2:
            raise ValidationError("a type needs k >= 2 counts")
        if any(c < 0 for c in counts):
            raise ValidationError("counts must be non-negative")
        object.__setattr__(self, "counts", counts)

    @property
    def n(self) -> int:
        return sum(self.counts)

    @property
    def k(self) -> int:
        return len(self.counts)

    @property
    def probs(self) -> np.ndarray:
        """counts / n (all zeros when n == 0)."""
        c = np.asarray(self.counts, dtype=float)
        return c / self.n if self.n else c

    def as_array(self) -> np.ndarray:
        return np.asarray(self.counts, dtype=np.int64)


@dataclass(frozen=True)
class SeededSource:
    """Reproducible random stream identified by ``(seed, stream_id)``."""

    seed: int
    stream_id: int = 0

    def __post_init__(self):
        for name in ("seed", "stream_id"):
            v = getattr(self, name)
            if not 0 <= int(v) < 2**64:
                raise ValidationError(f"{name} must be a 64-bit unsigned integer")

    def generator(self) -> np.random.Generator:
        """A fresh generator positioned at the start of the stream."""
        ss = np.random.SeedSequence(int(self.seed), spawn_key=(int(self.stream_id),))
        return np.random.Generator(np.random.Philox(ss))

    def substream(self, index: int) -> "SeededSource":
        """Independent child stream, used for per-block parallel work."""
        child = (int(self.stream_id) * 1_000_003 + int(index) + 1) % 2**64
        return SeededSource(self.seed, child)


def empirical_type(symbols: Sequence[int], k: int) -> TypeDistribution:
    if k < 2:
        raise ValidationError("k must be >= 2")
    arr = np.asarray(symbols, dtype=np.int64).reshape(-1)
    if arr.size and (arr.min() < 0 or arr.max() >= k):
        bad = arr[(arr < 0) | (arr >= k)][0]
        raise SymbolOutOfRange(f"symbol {int(bad)} outside [0, {k})")
    return TypeDistribution(tuple(np.bincount(arr, minlength=k).tolist()))


def num_types(k: int, n: int) -> int:
    """|P_n| = C(n + k - 1, k - 1)."""
    return math.comb(n + k - 1, k - 1)


def enumerate_types(k: int, n: int) -> Iterator[TypeDistribution]:
    """Every composition of n into k non-negative parts, in lexicographic order."""
    if k < 2 or n < 1:
        raise ValidationError("enumerate_types needs k >= 2 and n >= 1")

    def rec(slots: int, total: int) -> Iterator[tuple[int, ...]]:
        if slots == 1:
            yield (total,)
            return
        for c in range(total + 1):
            for rest in rec(slots - 1, total - c):
                yield (c,) + rest

    for counts in rec(k, n):
        yield TypeDistribution(counts)


def _compositions(k: int, n: int) -> np.ndarray:
    if k == 2:
        first = np.arange(n + 1, dtype=np.int64)
        return np.stack([first, n - first], axis=1)
    return np.concatenate(
        [
            np.column_stack([np.full(num_types(k - 1, n - c), c, dtype=np.int64), _compositions(k - 1, n - c)])
            for c in range(n + 1)
        ]
    )


def _check_budget(k: int, n: int, budget: int) -> None:
    count = num_types(k, n)
    if count > budget:
        raise BudgetExceeded(f"{count} types for k={k}, n={n} exceed the budget of {budget}")


def type_blocks(k: int, n: int, budget: int = DEFAULT_TYPE_BUDGET) -> Iterator[np.ndarray]:
    """Stream all types as integer count arrays, one block per first count.

    Blocks arrive in lexicographic order, so concatenating them reproduces
    :func:`enumerate_types`. Memory per block is C(n - c0 + k - 2, k - 2) rows.
    """
    if k < 2 or n < 1:
        raise ValidationError("type_blocks needs k >= 2 and n >= 1")
    _check_budget(k, n, budget)
    if k == 2:
        yield _compositions(2, n)
        return
    for c0 in range(n + 1):
        rest = _compositions(k - 1, n - c0)
        yield np.column_stack([np.full(rest.shape[0], c0, dtype=np.int64), rest])


def type_array(k: int, n: int, budget: int = DEFAULT_TYPE_BUDGET) -> np.ndarray:
    """All types as one ``(C(n+k-1, k-1), k)`` integer array, lexicographic."""
    return np.concatenate(list(type_blocks(k, n, budget)))


def log_type_class_probs(counts: np.ndarray, q, ln_fact: np.ndarray | None = None) -> np.ndarray:
    """Vectorised ln Q^n(T(t)) for each row of ``counts``."""
    counts = np.asarray(counts, dtype=np.int64)
    qv = as_probs(q)
    if counts.shape[-1] != qv.shape[0]:
        raise DimensionMismatch(f"type has k={counts.shape[-1]}, distribution has k={qv.shape[0]}")
    n = int(counts.sum(axis=-1).max()) if counts.size else 0
    if ln_fact is None or ln_fact.shape[0] <= n:
        ln_fact = ln_factorial_table(n)
    row_n = counts.sum(axis=-1)
    return ln_fact[row_n] - ln_fact[counts].sum(axis=-1) + counts @ np.log(qv)


def log_type_class_prob(t: TypeDistribution, q) -> float:
    """ln Q^n(T(t)) = ln(n! / prod c_i!) + sum c_i ln Q_i, via ln-gamma."""
    return float(log_type_class_probs(t.as_array()[None, :], q)[0])


def _check_n(n: int) -> int:
    if int(n) != n or n < 1:
        raise ValidationError(f"sample size must be a positive integer, got {n!r}")
    return int(n)


def sample_types(p, n: int, trials: int, rng: np.random.Generator) -> np.ndarray:
    """``trials`` multinomial(n, p) count vectors drawn by inverse-CDF lookup."""
    pv = as_probs(p)
    cdf = np.cumsum(pv)
    u = rng.random((trials, n))
    idx = np.minimum(np.searchsorted(cdf, u, side="right"), pv.shape[0] - 1)
    return np.stack([(idx == j).sum(axis=1) for j in range(pv.shape[0])], axis=1).astype(np.int64)


def sample_type(p: Distribution, n: int, src: SeededSource) -> TypeDistribution:
    """One i.i.d. sample of length n from ``p``, summarised by its type."""
    n = _check_n(n)
    counts = sample_types(p, n, 1, src.generator())[0]
    return TypeDistribution(tuple(counts.tolist()))
