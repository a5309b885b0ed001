"""Mini-batch training with early stopping, and batched prediction."""
from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from ..errors import DivergenceDetected, ShapeMismatch
from .losses import l2_penalty
from .optim import OPTIMIZERS, clip_global_norm, make_optimizer

CLIP_NORM = 5.0


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-3
    dropout_rate: float = 0.0
    batch_size: int = 64
    optimizer: str = "adam"
    l2_lambda: float = 0.0
    max_epochs: int = 100
    patience: int = 10
    seed: int = 0
    lookback: int = 24

    def __post_init__(self):
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValueError("dropout_rate must lie in [0, 1)")
        if self.batch_size < 1:
            raise ValueError("batch_size must be at least 1")
        if self.patience < 1:
            raise ValueError("patience must be at least 1")
        if self.optimizer not in OPTIMIZERS:
            raise ValueError(f"optimizer must be one of {OPTIMIZERS}")
        if self.l2_lambda < 0:
            raise ValueError("l2_lambda must be non-negative")

    def to_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class EpochMetrics:
    epoch: int
    train_loss: float
    val_loss: float
    train_rmse: float
    val_rmse: float


@dataclass
class FitResult:
    model: object
    history: list = field(default_factory=list)
    stopped_epoch: int = 0
    best_epoch: int = 0


def predict(model, windows, batch_size: int = 2048) -> np.ndarray:
    """Eval-mode forward pass; returns a 1-D array of predictions."""
    X = np.asarray(windows, dtype=float)
    if X.ndim != 3:
        raise ShapeMismatch(f"windows must be (n, L, d), got shape {X.shape}")
    out = np.empty(X.shape[0])
    for start in range(0, X.shape[0], batch_size):
        out[start : start + batch_size] = model.forward(X[start : start + batch_size], training=False)[:, 0]
    return out


def _mse(y, pred):
    r = np.asarray(y, dtype=float) - pred
    return float(r @ r) / r.size


def fit(model, train, val, config: TrainConfig) -> FitResult:
    """Train ``model`` in place on ``train = (X, y)``, early-stopping on ``val``.

    Batches are drawn from a seeded permutation each epoch (the final short
    batch is kept). Reported train metrics average the per-batch squared
    errors seen during the epoch; validation metrics use an eval-mode pass.
    Loss columns include the L2 penalty, RMSE columns never do. The weights
    of the epoch with the lowest validation loss are restored on return.
    """
    dt = model.dtype
    X, y = np.asarray(train[0], dtype=dt), np.asarray(train[1], dtype=dt).reshape(-1)
    Xv, yv = np.asarray(val[0], dtype=dt), np.asarray(val[1], dtype=dt).reshape(-1)
    if X.shape[0] == 0 or Xv.shape[0] == 0:
        raise ValueError("train and validation sets must be nonempty")
    if X.shape[0] != y.size or Xv.shape[0] != yv.size:
        raise ShapeMismatch("window and target counts differ")

    shuffle_seq, dropout_seq = np.random.SeedSequence(config.seed).spawn(2)
    shuffle_rng = np.random.default_rng(shuffle_seq)
    dropout_rng = np.random.default_rng(dropout_seq)
    model.set_dropout(config.dropout_rate)
    optimizer = make_optimizer(config.optimizer, config.learning_rate)
    params = model.params()
    weight_keys = model.weight_keys()
    lam = config.l2_lambda
    clip = CLIP_NORM if model.recurrent else None

    n = X.shape[0]
    bs = config.batch_size
    result = FitResult(model)
    best_loss, best_state, wait = np.inf, model.state(), 0
    for epoch in range(1, config.max_epochs + 1):
        order = shuffle_rng.permutation(n)
        sq_total = 0.0
        for start in range(0, n, bs):
            idx = order[start : start + bs]
            pred = model.forward(X[idx], training=True, rng=dropout_rng)[:, 0]
            resid = y[idx] - pred
            batch_sq = float(resid.astype(float) @ resid)
            if not np.isfinite(batch_sq):
                raise DivergenceDetected(f"non-finite loss at epoch {epoch}")
            sq_total += batch_sq
            model.backward(((-2.0 / idx.size) * resid)[:, None])
            grads = model.grads()
            if lam:
                for key in weight_keys:
                    grads[key] = grads[key] + 2.0 * lam * params[key]
            if clip is not None:
                clip_global_norm(grads, clip)
            optimizer.step(params, grads)
        penalty, _ = l2_penalty(model.weights(), lam)
        train_mse = sq_total / n
        val_mse = _mse(yv, predict(model, Xv))
        if not np.isfinite(val_mse) or not np.isfinite(penalty):
            raise DivergenceDetected(f"non-finite validation loss at epoch {epoch}")
        val_loss = val_mse + penalty
        result.history.append(EpochMetrics(epoch, train_mse + penalty, val_loss, float(np.sqrt(train_mse)), float(np.sqrt(val_mse))))
        result.stopped_epoch = epoch
        if val_loss < best_loss:
            best_loss, best_state, wait = val_loss, model.state(), 0
            result.best_epoch = epoch
        else:
            wait += 1
            if wait >= config.patience:
                break
    model.load_state(best_state)
    return result
