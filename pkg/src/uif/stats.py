"""Rank correlation and least-squares line fitting.

Spearman's rho is computed as the Pearson correlation of average ranks,
which stays exact under ties (the ``1 - 6*sum(d^2)/...`` shortcut does not).
"""

from __future__ import annotations

import enum
import functools
import itertools
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy import stats as _sps

from .model import (
    DegenerateVariance,
    DegenerateX,
    LengthMismatch,
    NonFiniteValue,
    TooFewObservations,
)

DEFAULT_SEED = 20041111
MC_DRAWS = 100_000
EXACT_MAX_N = 7
TAPPROX_MIN_N = 11


class PValueMethod(str, enum.Enum):
    T_APPROX = "TApprox"
    PERMUTATION = "Permutation"


@dataclass(frozen=True)
class CorrelationResult:
    rho: float
    n: int
    p_value: float
    method: PValueMethod

    def __post_init__(self) -> None:
        if not -1.0 <= self.rho <= 1.0:
            raise ValueError(f"rho {self.rho} outside [-1, 1]")
        if self.n < 3:
            raise ValueError("correlation needs n >= 3")
        if not 0.0 <= self.p_value <= 1.0:
            raise ValueError(f"p_value {self.p_value} outside [0, 1]")


@dataclass(frozen=True)
class RegressionResult:
    slope: float
    intercept: float
    r_squared: float
    n: int

    def predict(self, x: float) -> float:
        return self.intercept + self.slope * x


def _finite_array(values: Iterable[float], name: str = "values") -> np.ndarray:
    arr = np.asarray(list(values), dtype=float)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional")
    if not np.all(np.isfinite(arr)):
        raise NonFiniteValue(f"{name} contains NaN or infinite entries")
    return arr


def rank_with_ties(values: Iterable[float]) -> np.ndarray:
    """1-based ranks; tied values share the mean of the ranks they span.

    >>> rank_with_ties([10, 20, 20, 30]).tolist()
    [1.0, 2.5, 2.5, 4.0]
    """
    arr = _finite_array(values)
    n = arr.size
    if n == 0:
        raise ValueError("cannot rank an empty collection")
    order = np.argsort(arr, kind="stable")
    sorted_vals = arr[order]
    ranks = np.empty(n, dtype=float)
    start = 0
    # walk runs of equal values in sorted order
    boundaries = np.flatnonzero(sorted_vals[1:] != sorted_vals[:-1]) + 1
    for stop in itertools.chain(boundaries.tolist(), [n]):
        ranks[order[start:stop]] = (start + 1 + stop) / 2.0
        start = stop
    return ranks


def pearson(x: np.ndarray, y: np.ndarray) -> float:
    xc = x - x.mean()
    yc = y - y.mean()
    sxx = float(np.dot(xc, xc))
    syy = float(np.dot(yc, yc))
    if sxx == 0.0 or syy == 0.0:
        raise DegenerateVariance("correlation undefined for a constant column")
    r = float(np.dot(xc, yc)) / math.sqrt(sxx * syy)
    return min(1.0, max(-1.0, r))


def _t_approx_p(rho: float, n: int) -> float:
    if abs(rho) >= 1.0:
        return 0.0
    df = n - 2
    t = rho * math.sqrt(df / (1.0 - rho * rho))
    return float(min(1.0, 2.0 * _sps.t.sf(abs(t), df)))


@functools.lru_cache(maxsize=None)
def _all_permutations(n: int) -> np.ndarray:
    return np.array(list(itertools.permutations(range(n))), dtype=np.intp)


def _perm_p(rx: np.ndarray, ry: np.ndarray, rho: float, rng: np.random.Generator | None, draws: int) -> float:
    xc = rx - rx.mean()
    yc = ry - ry.mean()
    denom = math.sqrt(float(np.dot(xc, xc)) * float(np.dot(yc, yc)))
    threshold = abs(rho) - 1e-12
    n = rx.size
    if n <= EXACT_MAX_N:
        perms = yc[_all_permutations(n)]
        stats = np.abs(perms @ xc) / denom
        return float(np.count_nonzero(stats >= threshold) / len(perms))
    if rng is None:
        rng = np.random.default_rng(DEFAULT_SEED)
    shuffled = rng.permuted(np.broadcast_to(yc, (draws, n)).copy(), axis=1)
    stats = np.abs(shuffled @ xc) / denom
    return float((np.count_nonzero(stats >= threshold) + 1) / (draws + 1))


def spearman(
    x: Sequence[float],
    y: Sequence[float],
    *,
    method: PValueMethod | str | None = None,
    rng: np.random.Generator | int | None = None,
    draws: int = MC_DRAWS,
) -> CorrelationResult:
    """Spearman rank correlation with a two-sided p-value.

    By default the p-value comes from an exact permutation distribution for
    n <= 7, a seeded Monte-Carlo permutation test for 8 <= n <= 10, and the
    t approximation above that. ``method`` forces one family; ``rng`` seeds
    the Monte-Carlo draws (an int is used as a seed).
    """
    xa = _finite_array(x, "x")
    ya = _finite_array(y, "y")
    if xa.size != ya.size:
        raise LengthMismatch(f"x has {xa.size} values, y has {ya.size}")
    n = xa.size
    if n < 3:
        raise TooFewObservations(f"need at least 3 pairs, got {n}")
    rx, ry = rank_with_ties(xa), rank_with_ties(ya)
    rho = pearson(rx, ry)
    if method is None:
        method = PValueMethod.T_APPROX if n >= TAPPROX_MIN_N else PValueMethod.PERMUTATION
    method = PValueMethod(method)
    if method is PValueMethod.T_APPROX:
        p = _t_approx_p(rho, n)
    else:
        gen = rng if isinstance(rng, np.random.Generator) or rng is None else np.random.default_rng(rng)
        p = _perm_p(rx, ry, rho, gen, draws)
    return CorrelationResult(rho, n, p, method)


def ols_regression(points: Iterable[tuple[float, float]]) -> RegressionResult:
    """Ordinary least squares fit of y on x."""
    pts = [(float(a), float(b)) for a, b in points]
    n = len(pts)
    if n < 2:
        raise TooFewObservations("regression needs at least 2 points")
    if not all(math.isfinite(a) and math.isfinite(b) for a, b in pts):
        raise NonFiniteValue("points contain NaN or infinite values")
    xbar = math.fsum(a for a, _ in pts) / n
    ybar = math.fsum(b for _, b in pts) / n
    sxx = math.fsum((a - xbar) ** 2 for a, _ in pts)
    syy = math.fsum((b - ybar) ** 2 for _, b in pts)
    sxy = math.fsum((a - xbar) * (b - ybar) for a, b in pts)
    if sxx == 0.0:
        raise DegenerateX("all x values are equal")
    slope = sxy / sxx
    intercept = ybar - slope * xbar
    r2 = 1.0 if syy == 0.0 else min(1.0, max(0.0, sxy * sxy / (sxx * syy)))
    return RegressionResult(slope, intercept, r2, n)
