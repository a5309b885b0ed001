"""Friedman rank test and the chi-squared upper tail."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import rankdata

_TINY = 1e-300


def _gamma_series(a, x, eps):
    # lower regularized P(a, x) by its power series
    term = 1.0 / a
    total = term
    n = 0
    while True:
        n += 1
        term *= x / (a + n)
        total += term
        if abs(term) < abs(total) * eps or n > 10_000:
            break
    return total * math.exp(-x + a * math.log(x) - math.lgamma(a))


def _gamma_cf(a, x, eps):
    # upper regularized Q(a, x) by modified Lentz continued fraction
    b = x + 1.0 - a
    c = 1.0 / _TINY
    d = 1.0 / b
    h = d
    for i in range(1, 10_000):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < _TINY:
            d = _TINY
        c = b + an / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < eps:
            break
    return math.exp(-x + a * math.log(x) - math.lgamma(a)) * h


def regularized_upper_gamma(a: float, x: float, eps: float = 1e-15) -> float:
    """Q(a, x) = Gamma(a, x) / Gamma(a): series below x = a + 1, continued fraction above."""
    if a <= 0:
        raise ValueError("shape a must be positive")
    if x <= 0:
        return 1.0
    if x < a + 1.0:
        return max(0.0, 1.0 - _gamma_series(a, x, eps))
    return min(1.0, _gamma_cf(a, x, eps))


def chi2_sf(x: float, df: int) -> float:
    return regularized_upper_gamma(df / 2.0, x / 2.0)


@dataclass(frozen=True)
class FriedmanResult:
    chi_squared: float
    df: int
    p_value: float
    rank_sums: np.ndarray

    def to_dict(self):
        return {"chi_squared": self.chi_squared, "df": self.df, "p_value": self.p_value, "rank_sums": self.rank_sums.tolist()}


def friedman_test(scores, lower_is_better: bool = True) -> FriedmanResult:
    """Friedman test over an (N blocks x k treatments) score matrix.

    Ties inside a block share their average rank. Rank 1 is the best score.
    """
    S = np.asarray(scores, dtype=float)
    if S.ndim != 2 or S.shape[0] < 2 or S.shape[1] < 2:
        raise ValueError("need at least 2 blocks and 2 treatments")
    if not np.isfinite(S).all():
        raise ValueError("scores must be finite")
    n, k = S.shape
    ranks = rankdata(S if lower_is_better else -S, axis=1)
    rank_sums = ranks.sum(axis=0)
    chi2 = 12.0 / (n * k * (k + 1)) * float(np.sum(rank_sums**2)) - 3.0 * n * (k + 1)
    chi2 = max(0.0, chi2)
    # float cancellation leaves ~1e-13 when every rank sum is equal
    if np.allclose(rank_sums, rank_sums[0], rtol=0, atol=1e-9):
        chi2 = 0.0
    return FriedmanResult(chi2, k - 1, chi2_sf(chi2, k - 1), rank_sums)
