"""Declarative model specifications and the layer stacks they build."""
from __future__ import annotations

from dataclasses import asdict, dataclass, replace

import numpy as np

from ..errors import InvalidSpec
from ..nn import LSTM, Conv1D, Dense, Dropout, Flatten, LastStep, MeanPool, RepeatOnce, Sequential, TrainConfig
from ..nn.layers import ACTIVATIONS
from ..nn.optim import OPTIMIZERS

FAMILIES = ("lstm", "stacked_lstm", "cnn", "cnn_lstm", "dnn", "time_distributed_mlp", "encoder_decoder", "arima")
NEURAL_FAMILIES = FAMILIES[:-1]

DISPLAY_NAMES = {
    "lstm": "LSTM",
    "stacked_lstm": "Stacked LSTM",
    "cnn": "CNN",
    "cnn_lstm": "CNN-LSTM",
    "dnn": "DNN",
    "time_distributed_mlp": "Time-Distributed MLP",
    "encoder_decoder": "Encoder-Decoder",
    "arima": "ARIMA",
}

# published parameter-count ranges, shown next to our exact counts
PUBLISHED_PARAM_RANGES = {
    "lstm": "100K-150K",
    "stacked_lstm": "400K-600K",
    "cnn": "50K-150K",
    "cnn_lstm": "300K-500K",
    "dnn": "300K-450K",
    "time_distributed_mlp": "150K-250K",
    "encoder_decoder": "400K-600K",
}

DEFAULT_L2 = 1e-4
CONV_WIDTH = 3


@dataclass(frozen=True)
class ModelSpec:
    """What to build and how to train it.

    ``split`` marks where the first stage ends for two-stage families: the
    number of conv layers for ``cnn`` / ``cnn_lstm`` and the number of encoder
    layers for ``encoder_decoder``. With ``regularized=False`` the built model
    trains with no dropout and no L2 penalty whatever ``dropout`` says.
    """

    family: str
    layer_widths: tuple = ()
    activations: tuple = ()
    learning_rate: float = 1e-3
    dropout: float = 0.0
    batch_size: int = 64
    optimizer: str = "adam"
    l2_lambda: float = DEFAULT_L2
    regularized: bool = False
    split: int = 0
    conv_width: int = CONV_WIDTH
    arima_order: tuple = (2, 1, 2)

    def __post_init__(self):
        object.__setattr__(self, "layer_widths", tuple(int(w) for w in self.layer_widths))
        object.__setattr__(self, "activations", tuple(self.activations))
        object.__setattr__(self, "arima_order", tuple(int(o) for o in self.arima_order))

    @property
    def effective_dropout(self) -> float:
        return self.dropout if self.regularized else 0.0

    @property
    def effective_l2(self) -> float:
        return self.l2_lambda if self.regularized else 0.0

    @property
    def label(self) -> str:
        base = DISPLAY_NAMES.get(self.family, self.family)
        return f"Reg. {base}" if self.regularized and self.family != "arima" else base

    def validate(self):
        if self.family not in FAMILIES:
            raise InvalidSpec(f"unknown family {self.family!r}")
        if self.family == "arima":
            p, d, q = self.arima_order
            if min(p, q) < 0 or d not in (0, 1, 2):
                raise InvalidSpec(f"invalid ARIMA orders {self.arima_order}")
            return self
        if not self.layer_widths or min(self.layer_widths) < 1:
            raise InvalidSpec("layer_widths must be a nonempty list of positive ints")
        if len(self.activations) != len(self.layer_widths):
            raise InvalidSpec("activations must have one entry per layer width")
        bad = [a for a in self.activations if a not in ACTIVATIONS]
        if bad:
            raise InvalidSpec(f"unknown activations {bad}")
        if not 0.0 <= self.dropout < 1.0:
            raise InvalidSpec("dropout must lie in [0, 1)")
        if self.learning_rate <= 0 or self.batch_size < 1 or self.l2_lambda < 0:
            raise InvalidSpec("learning_rate, batch_size and l2_lambda must be positive")
        if self.optimizer not in OPTIMIZERS:
            raise InvalidSpec(f"unknown optimizer {self.optimizer!r}")
        n = len(self.layer_widths)
        if self.family in ("cnn", "cnn_lstm", "encoder_decoder") and not 1 <= self.split < n:
            raise InvalidSpec(f"{self.family} needs 1 <= split < {n}")
        return self

    def train_config(self, seed=0, max_epochs=100, patience=10, lookback=24) -> TrainConfig:
        return TrainConfig(
            learning_rate=self.learning_rate,
            dropout_rate=self.effective_dropout,
            batch_size=self.batch_size,
            optimizer=self.optimizer,
            l2_lambda=self.effective_l2,
            max_epochs=max_epochs,
            patience=patience,
            seed=seed,
            lookback=lookback,
        )

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        return cls(**d).validate()


_DEFAULTS = {
    "lstm": dict(layer_widths=(64, 64, 32), activations=("tanh",) * 3, learning_rate=1e-3, dropout=0.3, batch_size=64),
    "stacked_lstm": dict(layer_widths=(128, 128, 64, 32), activations=("tanh",) * 4, learning_rate=1e-3, dropout=0.3, batch_size=64),
    "cnn": dict(layer_widths=(64, 128, 64), activations=("relu",) * 3, learning_rate=5e-4, dropout=0.25, batch_size=32, split=2),
    "cnn_lstm": dict(layer_widths=(64, 128, 64, 64), activations=("relu", "relu", "tanh", "tanh"), learning_rate=1e-3, dropout=0.3, batch_size=64, split=2),
    "dnn": dict(layer_widths=(256, 128, 64, 32), activations=("relu",) * 4, learning_rate=1e-3, dropout=0.4, batch_size=128),
    "time_distributed_mlp": dict(layer_widths=(128, 64, 32), activations=("relu",) * 3, learning_rate=5e-4, dropout=0.2, batch_size=64, optimizer="rmsprop"),
    "encoder_decoder": dict(layer_widths=(128, 128, 64, 64), activations=("tanh",) * 4, learning_rate=5e-4, dropout=0.3, batch_size=64, split=2),
    "arima": dict(),
}


def default_spec(family: str, regularized: bool = False) -> ModelSpec:
    """The tuned configuration for ``family`` (unregularized unless asked)."""
    if family not in _DEFAULTS:
        raise InvalidSpec(f"unknown family {family!r}")
    return ModelSpec(family, regularized=regularized, **_DEFAULTS[family]).validate()


def _lstm_stack(widths, n_in, rng, drop, last_returns_sequence=False):
    layers = []
    for i, h in enumerate(widths):
        seq = last_returns_sequence or i < len(widths) - 1
        layers += [LSTM(n_in, h, return_sequences=seq, rng=rng), Dropout(drop)]
        n_in = h
    return layers, n_in


def _dense_stack(widths, acts, n_in, rng, drop):
    layers = []
    for h, act in zip(widths, acts):
        layers += [Dense(n_in, h, act, rng), Dropout(drop)]
        n_in = h
    return layers, n_in


def _conv_stack(widths, acts, n_in, width, rng, drop):
    layers = []
    for f, act in zip(widths, acts):
        layers += [Conv1D(n_in, f, width, act, rng), Dropout(drop)]
        n_in = f
    return layers, n_in


def build_model(spec: ModelSpec, lookback: int, n_features: int, seed: int = 0) -> Sequential:
    """Materialize a neural family as a :class:`Sequential` ending in a 1-unit linear head.

    Dropout layers are always present (rate 0 when unregularized) so both
    variants draw identical initial weights from ``seed``.
    """
    spec.validate()
    if spec.family == "arima":
        raise InvalidSpec("ARIMA is not a neural family; use fit_arima")
    rng = np.random.default_rng(seed)
    drop = spec.effective_dropout
    w, acts, s = spec.layer_widths, spec.activations, spec.split
    fam = spec.family
    if fam in ("lstm", "stacked_lstm"):
        layers, n = _lstm_stack(w, n_features, rng, drop)
    elif fam == "cnn":
        layers, n = _conv_stack(w[:s], acts[:s], n_features, spec.conv_width, rng, drop)
        steps = lookback - s * (spec.conv_width - 1)
        if steps < 1:
            raise InvalidSpec(f"lookback {lookback} too short for {s} conv layers of width {spec.conv_width}")
        layers.append(Flatten())
        dense, n = _dense_stack(w[s:], acts[s:], n * steps, rng, drop)
        layers += dense
    elif fam == "cnn_lstm":
        layers, n = _conv_stack(w[:s], acts[:s], n_features, spec.conv_width, rng, drop)
        if lookback - s * (spec.conv_width - 1) < 1:
            raise InvalidSpec(f"lookback {lookback} too short for {s} conv layers of width {spec.conv_width}")
        rec, n = _lstm_stack(w[s:], n, rng, drop)
        layers += rec
    elif fam == "dnn":
        layers, n = _dense_stack(w, acts, n_features, rng, drop)
        layers.insert(0, LastStep())
    elif fam == "time_distributed_mlp":
        layers, n = _dense_stack(w, acts, n_features, rng, drop)
        layers.append(MeanPool())
    elif fam == "encoder_decoder":
        enc, n = _lstm_stack(w[:s], n_features, rng, drop)
        dec, n = _lstm_stack(w[s:], n, rng, drop)
        layers = enc + [RepeatOnce()] + dec
    else:  # pragma: no cover - validate() rejects unknown families
        raise InvalidSpec(fam)
    layers.append(Dense(n, 1, "identity", rng))
    return Sequential(layers, (lookback, n_features), spec)


def count_parameters(model: Sequential) -> int:
    """Trainable scalars, found by walking the model's parameter arrays."""
    return int(sum(p.size for p in model.params().values()))


def closed_form_parameter_count(spec: ModelSpec, lookback: int, n_features: int) -> int:
    """Trainable scalars from layer sizes alone.

    dense ``out (in + 1)``, LSTM ``4 h (in + h + 1)``, conv ``f (c k + 1)``.
    """
    spec.validate()
    if spec.family == "arima":
        p, _, q = spec.arima_order
        return p + q + 1

    def dense(i, o):
        return o * (i + 1)

    def lstm(i, h):
        return 4 * h * (i + h + 1)

    def conv(c, f):
        return f * (c * spec.conv_width + 1)

    w, s, fam = spec.layer_widths, spec.split, spec.family
    total, n = 0, n_features
    if fam in ("lstm", "stacked_lstm", "encoder_decoder"):
        for h in w:
            total += lstm(n, h)
            n = h
    elif fam in ("cnn", "cnn_lstm"):
        for f in w[:s]:
            total += conv(n, f)
            n = f
        if fam == "cnn":
            n *= lookback - s * (spec.conv_width - 1)
            for h in w[s:]:
                total += dense(n, h)
                n = h
        else:
            for h in w[s:]:
                total += lstm(n, h)
                n = h
    else:
        for h in w:
            total += dense(n, h)
            n = h
    return total + dense(n, 1)


def architecture(spec: ModelSpec, lookback: int, n_features: int, seed: int) -> dict:
    return {"spec": spec.to_dict(), "lookback": lookback, "n_features": n_features, "seed": seed}


def model_from_architecture(arch: dict) -> Sequential:
    return build_model(ModelSpec.from_dict(arch["spec"]), arch["lookback"], arch["n_features"], arch["seed"])


def with_regularization(spec: ModelSpec, regularized: bool = True) -> ModelSpec:
    return replace(spec, regularized=regularized)
