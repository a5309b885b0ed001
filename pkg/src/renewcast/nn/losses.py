"""Squared-error loss, RMSE and the L2 weight penalty."""
from __future__ import annotations

import numpy as np

from ..errors import LengthMismatch


def _pair(y_true, y_pred):
    t = np.asarray(y_true, dtype=float).reshape(-1)
    p = np.asarray(y_pred, dtype=float).reshape(-1)
    if t.size != p.size:
        raise LengthMismatch(f"y_true has {t.size} values, y_pred has {p.size}")
    return t, p


def l2_penalty(weights, l2_lambda: float):
    """``lambda * sum ||W||^2`` and its gradients ``2 lambda W`` (one per weight array)."""
    weights = list(weights)
    if l2_lambda == 0:
        return 0.0, [np.zeros_like(w) for w in weights]
    penalty = l2_lambda * sum(float(np.sum(w * w)) for w in weights)
    return penalty, [2.0 * l2_lambda * w for w in weights]


def mse_loss(y_true, y_pred, l2_lambda: float = 0.0, params=()):
    """Mean squared error plus the L2 penalty on ``params`` (weights only, never biases).

    Returns ``(loss, grad)`` where ``grad`` is the derivative of the loss with
    respect to ``y_pred`` (same shape as ``y_pred``). Weight gradients of the
    penalty come from :func:`l2_penalty`.
    """
    t, p = _pair(y_true, y_pred)
    if t.size == 0:
        raise LengthMismatch("empty input")
    resid = t - p
    penalty, _ = l2_penalty(params, l2_lambda)
    loss = float(resid @ resid) / t.size + penalty
    grad = (-2.0 / t.size) * resid
    return loss, grad.reshape(np.shape(y_pred))


def rmse(y_true, y_pred) -> float:
    t, p = _pair(y_true, y_pred)
    if t.size == 0:
        raise LengthMismatch("rmse needs at least one value")
    resid = t - p
    return float(np.sqrt(resid @ resid / t.size))
