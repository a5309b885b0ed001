"""ARIMA(p, d, q) by conditional sum of squares, with rolling one-step forecasts.

The differenced series ``w`` follows
``w_t = c + sum_i phi_i w_{t-i} + e_t + sum_j theta_j e_{t-j}``. Given
parameters, the residuals solve a linear recursion (pre-sample errors are
zero), computed with an IIR filter; the same filter yields the exact
gradient of the mean squared residual, which is minimized with Adam.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
from scipy.signal import lfilter

from ..errors import InvalidOrders, NonConvergence, TooShort
from ..nn.optim import Adam


@dataclass(frozen=True)
class ArimaParams:
    p: int
    d: int
    q: int
    ar: tuple
    ma: tuple
    intercept: float
    css: float = float("nan")
    converged: bool = True

    @property
    def orders(self):
        return (self.p, self.d, self.q)

    def to_dict(self):
        return {"orders": [self.p, self.d, self.q], "ar": list(self.ar), "ma": list(self.ma),
                "intercept": self.intercept, "css": self.css, "converged": self.converged}


def _check_orders(orders):
    p, d, q = (int(o) for o in orders)
    if p < 0 or q < 0 or d not in (0, 1, 2):
        raise InvalidOrders(f"orders must have p, q >= 0 and d in {{0, 1, 2}}, got {orders}")
    return p, d, q


def _lagged(w, p):
    """Columns ``w_{t-1} .. w_{t-p}`` for rows ``t = p .. m-1``."""
    m = w.size
    return np.column_stack([w[p - i : m - i] for i in range(1, p + 1)]) if p else np.zeros((m - p, 0))


def css_residuals(w, c, phi, theta):
    """One-step errors for ``t >= p`` with zero pre-sample errors."""
    p = len(phi)
    u = w[p:] - c - (_lagged(w, p) @ np.asarray(phi) if p else 0.0)
    return lfilter([1.0], np.r_[1.0, theta], u)


def _css_and_grad(w, lags, c, phi, theta):
    p = len(phi)
    den = np.r_[1.0, theta]
    u = w[p:] - c - (lags @ phi if p else 0.0)
    e = lfilter([1.0], den, u)
    n = e.size
    grads = [lfilter([1.0], den, -np.ones(n))]
    for i in range(p):
        grads.append(lfilter([1.0], den, -lags[:, i]))
    for j in range(1, len(theta) + 1):
        shifted = np.r_[np.zeros(j), e[:-j]]
        grads.append(lfilter([1.0], den, -shifted))
    loss = float(e @ e) / n
    g = np.array([2.0 * float(e @ de) / n for de in grads])
    return loss, g, e


def _make_invertible(theta, shrink=0.99):
    if theta.size == 0:
        return theta
    roots = np.roots(np.r_[1.0, theta])
    big = np.abs(roots) >= shrink
    if not big.any():
        return theta
    roots[big] = roots[big] / np.abs(roots[big]) * shrink
    return np.real(np.poly(roots))[1:]


def difference_series(y, d):
    w = np.asarray(y, dtype=float)
    for _ in range(d):
        w = np.diff(w)
    return w


def fit_arima(series, orders=(2, 1, 2), max_iter=3000, learning_rate=0.01, tol=1e-10) -> ArimaParams:
    """Estimate ``(c, phi, theta)`` on ``series`` by CSS minimization."""
    p, d, q = _check_orders(orders)
    y = np.asarray(series, dtype=float)
    if not np.isfinite(y).all():
        raise ValueError("series contains non-finite values")
    w = difference_series(y, d)
    if w.size < p + q + 10:
        raise TooShort(f"series too short for ARIMA{(p, d, q)}")
    # optimize on a standardized copy so one step size suits every scale
    loc, sd = float(w.mean()), float(w.std())
    sd = sd if sd > 0 else 1.0
    z = (w - loc) / sd
    lags = _lagged(z, p)
    params = {"x": np.zeros(1 + p + q)}
    opt = Adam(learning_rate)
    best = (np.inf, params["x"].copy())
    prev = np.inf
    converged = False
    for _ in range(max_iter):
        x = params["x"]
        loss, g, _ = _css_and_grad(z, lags, x[0], x[1 : 1 + p], x[1 + p :])
        if not np.isfinite(loss) or not np.isfinite(g).all():
            raise NonConvergence("CSS objective became non-finite")
        if loss < best[0]:
            best = (loss, x.copy())
        if abs(prev - loss) < tol and np.linalg.norm(g) < 1e-4:
            converged = True
            break
        prev = loss
        opt.step(params, {"x": g})
        params["x"][1 + p :] = _make_invertible(params["x"][1 + p :])
    x = best[1]
    phi, theta = x[1 : 1 + p], x[1 + p :]
    # undo standardization: w = loc + sd z  =>  c_w = sd c_z + loc (1 - sum phi)
    c = sd * x[0] + loc * (1.0 - float(np.sum(phi)))
    return ArimaParams(p, d, q, tuple(map(float, phi)), tuple(map(float, theta)), float(c), best[0] * sd * sd, converged)


def one_step_predictions(series, params: ArimaParams):
    """In-sample rolling one-step forecasts of the level series.

    Entry ``t`` uses observations before ``t`` only; the first ``d + p`` rows
    have no forecast and are NaN.
    """
    y = np.asarray(series, dtype=float)
    w = difference_series(y, params.d)
    e = css_residuals(w, params.intercept, np.asarray(params.ar), np.asarray(params.ma))
    start = params.d + params.p
    out = np.full(y.size, np.nan)
    # y_t - yhat_t equals w_t - what_t = e_t for any differencing order
    out[start:] = y[start:] - e
    return out


def arima_fit_forecast(series, orders, train_rows):
    """Fit on ``series[:n_train]`` and forecast every later row one step ahead.

    ``train_rows`` is the training row count or a ``(0, n_train)`` range.
    Returns ``(params, forecasts)`` with one forecast per validation row.
    """
    n_train = train_rows[1] if isinstance(train_rows, tuple) else int(train_rows)
    y = np.asarray(series, dtype=float)
    params = fit_arima(y[:n_train], orders)
    return params, one_step_predictions(y, params)[n_train:]


def select_orders(series, n_train, p_values=(0, 1, 2), q_values=(0, 1, 2), d=1):
    """Grid over ``(p, d, q)`` keeping the lowest validation RMSE."""
    y = np.asarray(series, dtype=float)
    best = None
    for p, q in itertools.product(p_values, q_values):
        try:
            _, fc = arima_fit_forecast(y, (p, d, q), n_train)
        except NonConvergence:
            continue
        err = float(np.sqrt(np.mean((y[n_train:] - fc) ** 2)))
        if best is None or err < best[0]:
            best = (err, (p, d, q))
    if best is None:
        raise NonConvergence("no order in the grid could be fitted")
    return best[1]
