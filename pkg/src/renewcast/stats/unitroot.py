"""Augmented Dickey-Fuller and KPSS stationarity tests (constant / level case)."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy.special import ndtr

from ..errors import DegenerateSeries, SingularDesign, TooShort

# MacKinnon (1994) response surface, one variable, constant-only regression
_TAU_MAX = 2.74
_TAU_MIN = -18.83
_TAU_STAR = -1.61
_SMALL_P = (2.1659, 1.4412, 3.8269e-2)
_LARGE_P = (1.7339, 9.3202e-1, -1.2745e-1, -1.0368e-2)
P_FLOOR = 1e-30

# level-stationarity KPSS critical values (Kwiatkowski, Phillips, Schmidt and Shin, 1992)
KPSS_CRIT = (0.347, 0.463, 0.574, 0.739)
KPSS_PVALS = (0.10, 0.05, 0.025, 0.01)

# one-sided 5% normal quantile; lag pruning keeps the last lag when |t| exceeds it
_T_STOP = 1.6448536269514722

ALPHA = 0.05


def mackinnon_pvalue(stat: float) -> float:
    """Asymptotic p-value of an ADF statistic (constant, no trend), clamped to [1e-30, 1]."""
    if stat > _TAU_MAX:
        return 1.0
    if stat < _TAU_MIN:
        return P_FLOOR
    coef = _SMALL_P if stat <= _TAU_STAR else _LARGE_P
    z = sum(c * stat**i for i, c in enumerate(coef))
    return float(min(1.0, max(P_FLOOR, ndtr(z))))


def schwert_maxlag(n: int) -> int:
    return int(math.ceil(12.0 * (n / 100.0) ** 0.25))


def _lag_design(x, xdiff, nlags):
    """Rows t = nlags+1 .. n-1 of the ADF regression; columns [1, y_{t-1}, dy_{t-1}, ..., dy_{t-nlags}]."""
    nobs = xdiff.size - nlags
    cols = [np.ones(nobs), x[nlags : nlags + nobs]]
    for i in range(1, nlags + 1):
        cols.append(xdiff[nlags - i : nlags - i + nobs])
    return np.column_stack(cols), xdiff[nlags:]


def _ols_tstat(X, y, col):
    q, r = np.linalg.qr(X)
    diag = np.abs(np.diag(r))
    if diag.min() <= 1e-10 * max(diag.max(), 1e-300):
        raise SingularDesign("ADF regression design is rank deficient")
    beta = np.linalg.solve(r, q.T @ y)
    resid = y - X @ beta
    dof = X.shape[0] - X.shape[1]
    sigma2 = float(resid @ resid) / dof
    rinv = np.linalg.solve(r, np.eye(r.shape[0]))
    var = sigma2 * float(np.sum(rinv[col] ** 2))
    return beta[col] / math.sqrt(var)


def _select_lag(x, xdiff, maxlag):
    """Downward t-test pruning: largest lag whose own |t| >= 1.645, fit on the common sample.

    All candidate models are nested prefixes of one design, so a single QR
    factorisation yields every model's last-coefficient t statistic.
    """
    X, y = _lag_design(x, xdiff, maxlag)
    q, r = np.linalg.qr(X)
    z = q.T @ y
    rss_full = float(np.sum((y - q @ z) ** 2))
    tail = np.concatenate([np.cumsum((z**2)[::-1])[::-1], [0.0]])
    nobs = X.shape[0]
    diag = np.abs(np.diag(r))
    if diag[:2].min() <= 1e-10 * max(diag.max(), 1e-300):
        raise SingularDesign("ADF regression design is rank deficient")
    for lag in range(maxlag, -1, -1):
        m = lag + 2
        if diag[m - 1] <= 1e-12 * diag.max():
            continue
        rss = rss_full + tail[m]
        sigma = math.sqrt(rss / (nobs - m))
        if sigma == 0:
            return lag
        if abs(z[m - 1]) / sigma >= _T_STOP:
            return lag
    return 0


def adf_test(series, max_lags="auto"):
    """Augmented Dickey-Fuller test with an intercept.

    Regresses ``dy_t`` on ``[1, y_{t-1}, dy_{t-1..p}]`` by least squares and
    returns ``(stat, p_value, lags_used)`` where ``stat`` is the t ratio of the
    ``y_{t-1}`` coefficient. With ``max_lags="auto"`` the upper bound is
    ``ceil(12 (n/100)^{1/4})`` and the lag order is pruned downward until the
    longest lag is significant at 10% (two-sided); an integer ``max_lags`` is
    used as the fixed lag order.
    """
    x = np.asarray(series, dtype=float)
    n = x.size
    if not np.isfinite(x).all():
        raise ValueError("series contains non-finite values")
    auto = max_lags == "auto" or max_lags is None
    maxlag = schwert_maxlag(n) if auto else int(max_lags)
    maxlag = max(0, min(maxlag, n // 2 - 3))
    if n <= maxlag + 10:
        raise TooShort(f"ADF needs more than {maxlag + 10} observations, got {n}")
    xdiff = np.diff(x)
    lags = _select_lag(x, xdiff, maxlag) if auto else maxlag
    X, y = _lag_design(x, xdiff, lags)
    stat = float(_ols_tstat(X, y, 1))
    return stat, mackinnon_pvalue(stat), int(lags)


def kpss_bandwidth(n: int) -> int:
    return int(4.0 * (n / 100.0) ** 0.25)


def long_run_variance(resid, nlags: int) -> float:
    """Newey-West variance with Bartlett weights ``1 - l/(nlags+1)``."""
    e = np.asarray(resid, dtype=float)
    n = e.size
    s = float(e @ e)
    for lag in range(1, nlags + 1):
        s += 2.0 * (1.0 - lag / (nlags + 1.0)) * float(e[lag:] @ e[:-lag])
    return s / n


def kpss_test(series, nlags=None):
    """Level-stationarity KPSS test; returns ``(stat, p_value)``.

    The p-value is linearly interpolated in the tabulated critical values and
    therefore lies in [0.01, 0.10].
    """
    x = np.asarray(series, dtype=float)
    n = x.size
    if n < 30:
        raise TooShort(f"KPSS needs at least 30 observations, got {n}")
    if not np.isfinite(x).all():
        raise ValueError("series contains non-finite values")
    nlags = kpss_bandwidth(n) if nlags is None else int(nlags)
    resid = x - x.mean()
    lrv = long_run_variance(resid, nlags)
    if lrv <= 1e-300 * max(1.0, float(np.abs(x).max()) ** 2):
        raise DegenerateSeries("long-run variance is zero (constant series)")
    stat = float(np.sum(np.cumsum(resid) ** 2) / (n**2 * lrv))
    p = float(np.interp(stat, KPSS_CRIT, KPSS_PVALS))
    return stat, p


@dataclass(frozen=True)
class StationarityReport:
    adf_stat: float
    adf_pvalue: float
    lags_used: int
    kpss_stat: float
    kpss_pvalue: float
    verdict: str

    def to_dict(self):
        return asdict(self)


def joint_verdict(adf_p: float, kpss_p: float, alpha: float = ALPHA) -> str:
    """Stationary only when ADF rejects a unit root and KPSS does not reject stationarity."""
    return "stationary" if adf_p < alpha and kpss_p > alpha else "non_stationary"


def stationarity_report(series, max_lags="auto", alpha: float = ALPHA) -> StationarityReport:
    adf_stat, adf_p, lags = adf_test(series, max_lags)
    kpss_stat, kpss_p = kpss_test(series)
    return StationarityReport(adf_stat, adf_p, lags, kpss_stat, kpss_p, joint_verdict(adf_p, kpss_p, alpha))
