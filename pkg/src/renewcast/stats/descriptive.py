"""Descriptive moments and normal-approximation confidence intervals."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from ..errors import TooFewSamples

Z_95 = 1.96


@dataclass(frozen=True)
class SummaryStats:
    mean: float
    median: float
    std: float
    skewness: float
    kurtosis: float
    min: float
    max: float

    def to_dict(self):
        return asdict(self)


def summary_stats(series) -> SummaryStats:
    """Mean, median, sample std, adjusted skewness, adjusted excess kurtosis, range.

    Skewness needs n >= 3 and kurtosis n >= 4; they are NaN below that.
    """
    x = np.asarray(series, dtype=float)
    n = x.size
    if n < 2:
        raise TooFewSamples("summary statistics need at least two values")
    if not np.isfinite(x).all():
        raise ValueError("series contains non-finite values")
    mean = float(x.mean())
    d = x - mean
    m2 = float(np.mean(d**2))
    m3 = float(np.mean(d**3))
    m4 = float(np.mean(d**4))
    skew = kurt = math.nan
    if m2 == 0:
        skew = kurt = 0.0
    else:
        if n >= 3:
            g1 = m3 / m2**1.5
            skew = math.sqrt(n * (n - 1)) / (n - 2) * g1
        if n >= 4:
            g2 = m4 / m2**2 - 3.0
            kurt = ((n + 1) * g2 + 6.0) * (n - 1) / ((n - 2) * (n - 3))
    return SummaryStats(
        mean=mean,
        median=float(np.median(x)),
        std=float(x.std(ddof=1)),
        skewness=float(skew),
        kurtosis=float(kurt),
        min=float(x.min()),
        max=float(x.max()),
    )


@dataclass(frozen=True)
class ConfidenceInterval:
    mean: float
    half_width: float
    k: int

    @property
    def lower(self):
        return self.mean - self.half_width

    @property
    def upper(self):
        return self.mean + self.half_width


def confidence_interval(samples) -> ConfidenceInterval:
    """``mean +/- 1.96 * s / sqrt(k)`` with ``s`` the n-1 sample standard deviation."""
    x = np.asarray(samples, dtype=float)
    k = x.size
    if k < 2:
        raise TooFewSamples("a confidence interval needs at least two samples")
    sigma = float(x.std(ddof=1))
    return ConfidenceInterval(float(x.mean()), Z_95 * sigma / math.sqrt(k), k)
