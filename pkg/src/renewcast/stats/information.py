"""Histogram (plug-in) mutual information in nats."""
from __future__ import annotations

import numpy as np

from ..errors import LengthMismatch

DEFAULT_BINS = 16


def bin_index(x, bins: int = DEFAULT_BINS) -> np.ndarray:
    """Equal-width bin of each value over the observed range; a constant input lands in bin 0."""
    x = np.asarray(x, dtype=float)
    lo, hi = float(x.min()), float(x.max())
    if hi == lo:
        return np.zeros(x.size, dtype=np.intp)
    idx = np.floor((x - lo) / (hi - lo) * bins).astype(np.intp)
    return np.clip(idx, 0, bins - 1)


def joint_histogram(x, y, bins: int = DEFAULT_BINS) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape:
        raise LengthMismatch(f"x has {x.size} values, y has {y.size}")
    flat = bin_index(x, bins) * bins + bin_index(y, bins)
    counts = np.bincount(flat, minlength=bins * bins).reshape(bins, bins)
    return counts / x.size


def mutual_information_from_joint(joint) -> float:
    """MI of a discrete joint mass table, with 0 log 0 taken as 0."""
    p = np.asarray(joint, dtype=float)
    total = p.sum()
    if total <= 0:
        raise ValueError("joint table has no mass")
    p = p / total
    px = p.sum(axis=1, keepdims=True)
    py = p.sum(axis=0, keepdims=True)
    nz = p > 0
    outer = (px * py)[nz]
    return float(max(0.0, np.sum(p[nz] * (np.log(p[nz]) - np.log(outer)))))


def mutual_information(x, y, bins: int = DEFAULT_BINS) -> float:
    """Plug-in estimate of I(X; Y) from a ``bins`` x ``bins`` equal-width histogram."""
    return mutual_information_from_joint(joint_histogram(x, y, bins))


def mutual_information_matrix(columns: dict, bins: int = DEFAULT_BINS):
    names = list(columns)
    out = np.zeros((len(names), len(names)))
    for i, a in enumerate(names):
        for j in range(i, len(names)):
            out[i, j] = out[j, i] = mutual_information(columns[a], columns[names[j]], bins)
    return names, out
