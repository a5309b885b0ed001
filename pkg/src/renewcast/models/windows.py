"""Sliding windows over a design matrix, never crossing a partition boundary."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import TooShort


@dataclass(frozen=True)
class WindowSpec:
    lookback: int = 24
    horizon: int = 1
    n_features: int | None = None

    def __post_init__(self):
        if self.lookback < 1:
            raise ValueError("lookback must be at least 1")
        if self.horizon != 1:
            raise ValueError("only one-step-ahead windows are supported")


def make_windows(X, y, lookback: int):
    """Window ``i`` holds rows ``i .. i+L-1`` of ``X`` and targets ``y[i+L]``.

    Returns ``(windows, targets)`` with shapes ``(n-L, L, d)`` and ``(n-L,)``.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    y = np.asarray(y, dtype=float).reshape(-1)
    n = X.shape[0]
    if y.size != n:
        raise ValueError("X and y must have the same number of rows")
    if n <= lookback:
        raise TooShort(f"need more than {lookback} rows for lookback {lookback}, got {n}")
    view = np.lib.stride_tricks.sliding_window_view(X, lookback, axis=0)[: n - lookback]
    # sliding_window_view puts the window axis last: (n-L, d, L) -> (n-L, L, d)
    return np.ascontiguousarray(view.transpose(0, 2, 1)), y[lookback:].copy()


def partition_windows(X, y, lookback: int, boundaries):
    """Window each contiguous partition ``[start, stop)`` independently.

    ``boundaries`` is a list of ``(start, stop)`` row ranges; the result is a
    list of ``(windows, targets, target_rows)`` with ``target_rows`` the
    absolute row index each target came from.
    """
    out = []
    for start, stop in boundaries:
        W, t = make_windows(np.asarray(X)[start:stop], np.asarray(y)[start:stop], lookback)
        out.append((W, t, np.arange(start + lookback, stop)))
    return out
