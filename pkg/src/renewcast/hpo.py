"""Random search over a fixed space followed by a one-step grid refinement.

Trials are scored by mean validation RMSE across several chronological
splits. Ties fall back to the train/validation gap and then to the
parameter count, so selection is deterministic.
"""
from __future__ import annotations

import csv
import itertools
import math
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import AllTrialsDiverged, DivergenceDetected, NonConvergence
from .evaluation import EvalSettings, evaluate_prepared, prepare_split
from .models import ModelSpec, default_spec

HPO_MAX_EPOCHS = 30
HPO_PATIENCE = 5


@dataclass(frozen=True)
class SearchSpace:
    layers: tuple = (2, 5)
    neurons: tuple = (32, 256)
    learning_rate: tuple = (1e-4, 1e-2)
    dropout: tuple = (0.1, 0.5)
    batch_sizes: tuple = (32, 64, 128)
    activations: tuple = ("relu", "tanh", "sigmoid")

    def sample(self, rng) -> dict:
        lo, hi = np.log(self.learning_rate[0]), np.log(self.learning_rate[1])
        return {
            "layers": int(rng.integers(self.layers[0], self.layers[1] + 1)),
            "neurons": int(rng.integers(self.neurons[0], self.neurons[1] + 1)),
            "learning_rate": float(np.exp(rng.uniform(lo, hi))),
            "dropout": float(rng.uniform(*self.dropout)),
            "batch_size": int(self.batch_sizes[rng.integers(len(self.batch_sizes))]),
            "activation": str(self.activations[rng.integers(len(self.activations))]),
        }

    def contains(self, config: dict) -> bool:
        eps = 1e-12
        return (
            self.layers[0] <= config["layers"] <= self.layers[1]
            and self.neurons[0] <= config["neurons"] <= self.neurons[1]
            and self.learning_rate[0] * (1 - eps) <= config["learning_rate"] <= self.learning_rate[1] * (1 + eps)
            and self.dropout[0] - eps <= config["dropout"] <= self.dropout[1] + eps
            and config["batch_size"] in self.batch_sizes
            and config["activation"] in self.activations
        )


CONFIG_FIELDS = ("layers", "neurons", "learning_rate", "dropout", "batch_size", "activation")


def spec_from_config(family: str, config: dict) -> ModelSpec:
    """Map a sampled configuration onto a family template.

    All layers share the sampled width and activation. Two-stage families
    give the first ``layers // 2`` layers (at least one) to the first stage;
    LSTM cells keep their built-in tanh whatever the activation.
    """
    base = default_spec(family)
    n = config["layers"]
    split = 0
    if family == "cnn":
        split = n - 1
    elif family in ("cnn_lstm", "encoder_decoder"):
        split = max(1, n // 2)
    return replace(
        base,
        layer_widths=(config["neurons"],) * n,
        activations=(config["activation"],) * n,
        learning_rate=config["learning_rate"],
        dropout=config["dropout"],
        batch_size=config["batch_size"],
        regularized=True,
        split=split,
    ).validate()


@dataclass
class TrialResult:
    trial_id: int
    config: dict
    fold_rmses: list
    mean_rmse: float
    status: str = "ok"
    train_rmse: float = float("nan")
    n_params: int = 0
    seed: int = 0

    @property
    def gap(self) -> float:
        """Validation minus train RMSE (the overfitting signal)."""
        return self.mean_rmse - self.train_rmse

    def sort_key(self):
        if self.status != "ok":
            return (1, math.inf, math.inf, math.inf, self.trial_id)
        return (0, self.mean_rmse, abs(self.gap), self.n_params, self.trial_id)

    def to_dict(self):
        d = asdict(self)
        d["gap"] = self.gap
        return d


@dataclass
class Evaluation:
    """What an evaluator reports for one configuration."""

    fold_rmses: list
    train_rmse: float
    n_params: int
    status: str = "ok"


class SplitEvaluator:
    """Train a configuration on every ratio split and report validation RMSEs.

    Splits (plans and windows) are prepared once and shared by all trials.
    """

    def __init__(self, family, table, target, ratios=(0.2, 0.3, 0.4, 0.5), settings: EvalSettings | None = None):
        self.family = family
        self.settings = settings or EvalSettings(max_epochs=HPO_MAX_EPOCHS, patience=HPO_PATIENCE)
        self.splits = [prepare_split(table, target, r, self.settings) for r in ratios]
        self.calls = 0

    def __call__(self, config: dict, seed: int) -> Evaluation:
        self.calls += 1
        spec = spec_from_config(self.family, config)
        vals, trains, n_params = [], [], 0
        try:
            for prep in self.splits:
                out = evaluate_prepared(spec, prep, seed, self.settings)
                vals.append(out.metrics.val_rmse)
                trains.append(out.metrics.train_rmse)
                n_params = out.n_params
        except (DivergenceDetected, NonConvergence, FloatingPointError):
            return Evaluation([], float("nan"), n_params, "diverged")
        return Evaluation(vals, float(np.mean(trains)), n_params)


def _trial_seed(seed: int, index: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([seed, index])


def _run_trial(trial_id, config, evaluator, seed) -> TrialResult:
    ev = evaluator(config, seed)
    if ev.status != "ok" or not ev.fold_rmses or not np.isfinite(ev.fold_rmses).all():
        return TrialResult(trial_id, config, list(ev.fold_rmses), float("nan"), "diverged", ev.train_rmse, ev.n_params, seed)
    return TrialResult(trial_id, config, list(ev.fold_rmses), float(np.mean(ev.fold_rmses)), "ok", ev.train_rmse, ev.n_params, seed)


def rank_trials(trials) -> list:
    return sorted(trials, key=lambda t: t.sort_key())


def random_search(space: SearchSpace, family: str, evaluator, budget: int, seed: int) -> list:
    """Evaluate ``budget`` independent samples and return them best first.

    Trial ``i`` draws its configuration and training seed from
    ``(seed, i)`` alone, so results do not depend on evaluation order.
    """
    if budget < 1:
        raise ValueError("budget must be at least 1")
    trials = []
    for i in range(budget):
        ss = _trial_seed(seed, i)
        rng = np.random.default_rng(ss)
        config = space.sample(rng)
        train_seed = int(ss.generate_state(1)[0])
        trials.append(_run_trial(i, config, evaluator, train_seed))
    ranked = rank_trials(trials)
    if ranked[0].status != "ok":
        raise AllTrialsDiverged(f"all {budget} trials diverged")
    return ranked


def neighborhood(config: dict, space: SearchSpace) -> list:
    """Configs one grid step away on each numeric axis (lr x/÷2, neurons ±32, dropout ±0.1).

    Values are clamped to the space and duplicates removed; categorical axes
    stay fixed. An interior config has 3^3 = 27 neighbours including itself.
    """
    lr = config["learning_rate"]
    lrs = [min(max(v, space.learning_rate[0]), space.learning_rate[1]) for v in (lr / 2, lr, lr * 2)]
    ns = [min(max(v, space.neurons[0]), space.neurons[1]) for v in (config["neurons"] - 32, config["neurons"], config["neurons"] + 32)]
    ds = [round(min(max(v, space.dropout[0]), space.dropout[1]), 12) for v in (config["dropout"] - 0.1, config["dropout"], config["dropout"] + 0.1)]
    out, seen = [], set()
    for a, b, c in itertools.product(lrs, ns, ds):
        key = (a, b, c)
        if key in seen:
            continue
        seen.add(key)
        out.append({**config, "learning_rate": a, "neurons": b, "dropout": c})
    return out


@dataclass
class RefineResult:
    best: TrialResult
    evaluated: list = field(default_factory=list)
    improved: bool = False


def grid_refine(best: TrialResult, evaluator, space: SearchSpace | None = None) -> RefineResult:
    """Evaluate the neighbourhood of ``best``; keep the incumbent unless a neighbour beats it."""
    if best.status != "ok":
        raise ValueError("grid refinement starts from a successful trial")
    space = space or SearchSpace()
    evaluated = []
    for j, config in enumerate(neighborhood(best.config, space)):
        evaluated.append(_run_trial(10_000 + j, config, evaluator, best.seed))
    ok = rank_trials([t for t in evaluated if t.status == "ok"])
    if ok and ok[0].mean_rmse < best.mean_rmse:
        return RefineResult(ok[0], evaluated, True)
    return RefineResult(best, evaluated, False)


def overfitting_table(trials, top: int = 5) -> list:
    """Train RMSE, validation RMSE and their gap for the best ``top`` trials."""
    return [
        {"trial_id": t.trial_id, "train_rmse": t.train_rmse, "val_rmse": t.mean_rmse, "gap": t.gap}
        for t in rank_trials(trials)[:top]
        if t.status == "ok"
    ]


def write_trial_log(trials, path):
    """CSV with one row per trial: id, config fields, per-split RMSEs, mean, status."""
    trials = list(trials)
    n_folds = max((len(t.fold_rmses) for t in trials), default=0)
    with open(Path(path), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["trial_id", *CONFIG_FIELDS, *(f"fold_{i + 1}_rmse" for i in range(n_folds)), "mean_rmse", "train_rmse", "n_params", "status"])
        for t in trials:
            folds = [repr(float(v)) for v in t.fold_rmses] + [""] * (n_folds - len(t.fold_rmses))
            w.writerow([t.trial_id, *(t.config[f] for f in CONFIG_FIELDS), *folds,
                        "" if t.status != "ok" else repr(t.mean_rmse), repr(t.train_rmse), t.n_params, t.status])
