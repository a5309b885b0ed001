"""Small NumPy neural-network core: layers, losses, optimizers, training."""
from .layers import (
    ACTIVATIONS,
    LSTM,
    Conv1D,
    Dense,
    Dropout,
    Flatten,
    LastStep,
    Layer,
    MeanPool,
    RepeatOnce,
    activate,
    dropout_apply,
    sigmoid,
)
from .losses import l2_penalty, mse_loss, rmse
from .network import CHECKPOINT_FORMAT, Sequential, load_checkpoint, save_checkpoint
from .optim import OPTIMIZERS, Adam, RMSprop, clip_global_norm, make_optimizer, optimizer_step
from .training import EpochMetrics, FitResult, TrainConfig, fit, predict

__all__ = [
    "ACTIVATIONS", "LSTM", "Conv1D", "Dense", "Dropout", "Flatten", "LastStep", "Layer", "MeanPool",
    "RepeatOnce", "activate", "dropout_apply", "sigmoid", "l2_penalty", "mse_loss", "rmse",
    "CHECKPOINT_FORMAT", "Sequential", "load_checkpoint", "save_checkpoint", "OPTIMIZERS", "Adam",
    "RMSprop", "clip_global_norm", "make_optimizer", "optimizer_step", "EpochMetrics", "FitResult",
    "TrainConfig", "fit", "predict",
]
