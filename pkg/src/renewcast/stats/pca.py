"""Principal component analysis by singular value decomposition."""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from ..errors import DimensionMismatch


class RankDeficientWarning(UserWarning):
    pass


@dataclass(frozen=True)
class PcaModel:
    mean_vector: np.ndarray
    components: np.ndarray
    explained_variance_ratio: np.ndarray

    @property
    def n_components(self) -> int:
        return self.components.shape[0]

    def to_dict(self):
        return {
            "mean_vector": self.mean_vector.tolist(),
            "components": self.components.tolist(),
            "explained_variance_ratio": self.explained_variance_ratio.tolist(),
        }

    @classmethod
    def from_dict(cls, d):
        return cls(np.asarray(d["mean_vector"]), np.asarray(d["components"]), np.asarray(d["explained_variance_ratio"]))


def pca_fit(matrix, variance_target: float = 0.80, n_components: int | None = None) -> PcaModel:
    """Fit PCA and keep the fewest components reaching ``variance_target``.

    Components are signed so that each row's largest-magnitude loading is
    positive. ``n_components`` overrides the variance rule.
    """
    X = np.asarray(matrix, dtype=float)
    if X.ndim != 2 or X.shape[0] < 2:
        raise ValueError("PCA needs a 2-D matrix with at least two rows")
    mean = X.mean(axis=0)
    _, s, vt = np.linalg.svd(X - mean, full_matrices=False)
    var = s**2
    total = var.sum()
    if total == 0:
        raise ValueError("all columns are constant")
    ratio = var / total
    rank = int(np.sum(s > s[0] * max(X.shape) * np.finfo(float).eps))
    if rank < X.shape[1]:
        warnings.warn(f"matrix rank {rank} is below its {X.shape[1]} columns", RankDeficientWarning, stacklevel=2)
    if n_components is None:
        cum = np.cumsum(ratio)
        k = int(np.searchsorted(cum, variance_target - 1e-12) + 1)
        k = min(k, rank)
    else:
        k = int(n_components)
    comps = vt[:k].copy()
    pivots = np.argmax(np.abs(comps), axis=1)
    signs = np.sign(comps[np.arange(k), pivots])
    signs[signs == 0] = 1.0
    comps *= signs[:, None]
    return PcaModel(mean, comps, ratio[:k].copy())


def pca_project(model: PcaModel, matrix) -> np.ndarray:
    X = np.asarray(matrix, dtype=float)
    if X.ndim == 1:
        X = X[None, :]
    if X.shape[1] != model.mean_vector.size:
        raise DimensionMismatch(f"expected {model.mean_vector.size} columns, got {X.shape[1]}")
    return (X - model.mean_vector) @ model.components.T


def pca_reconstruct(model: PcaModel, scores) -> np.ndarray:
    return np.asarray(scores, dtype=float) @ model.components + model.mean_vector
