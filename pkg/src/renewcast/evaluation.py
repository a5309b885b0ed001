"""Split evaluation, forward-chaining folds, the ratio sweep and report files.

A sweep cell is one (model, ratio) pair evaluated on ``k`` forward-chaining
folds. Fold ``j`` of ``k`` uses the first ``m_j`` rows of the series, with
``m_j`` growing linearly from ``n (k+1) / (2k)`` to ``n``; each fold splits its
prefix chronologically so the last ``ratio`` share validates. The final fold
is therefore exactly the declared split of the full series.
"""
from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .errors import LengthMismatch, SplitTooSmall, TooFewFolds
from .features import PipelineOptions, apply_plan, fit_plan, scale
from .ingest import TimeSeriesTable
from .models import (
    PUBLISHED_PARAM_RANGES,
    ModelSpec,
    arima_fit_forecast,
    build_model,
    count_parameters,
    one_step_predictions,
)
from .models.windows import make_windows
from .nn import fit, predict
from .nn.losses import l2_penalty
from .stats import ConfidenceInterval, FriedmanResult, confidence_interval, friedman_test

RATIOS = (0.2, 0.3, 0.4, 0.5)
METRICS = ("train_rmse", "val_rmse", "train_mae", "val_mae", "train_r2", "val_r2", "train_loss", "val_loss")
METRIC_LABELS = {
    "train_rmse": "Train RMSE",
    "val_rmse": "Validation RMSE",
    "train_mae": "Train MAE",
    "val_mae": "Validation MAE",
    "train_r2": "Train R-Square",
    "val_r2": "Validation R-Square",
    "train_loss": "Train Loss",
    "val_loss": "Validation Loss",
}
LOWER_IS_BETTER = {m: not m.endswith("r2") for m in METRICS}
PLOT_TAIL = 500


def fmt(value) -> str:
    """CSV number format: 6 significant digits, ``.`` decimal separator."""
    if value is None or (isinstance(value, float) and math.isnan(value)):
        return ""
    return f"{float(value):.6g}"


# ---------------------------------------------------------------------------
# metrics


def regression_metrics(y_true, y_pred):
    """``(rmse, mae, r2, degenerate)``; R^2 is 0 and flagged when the target is constant."""
    t = np.asarray(y_true, dtype=float).reshape(-1)
    p = np.asarray(y_pred, dtype=float).reshape(-1)
    if t.size != p.size:
        raise LengthMismatch(f"{t.size} targets vs {p.size} predictions")
    if t.size == 0:
        raise LengthMismatch("no values to score")
    resid = t - p
    sse = float(resid @ resid)
    dev = t - t.mean()
    sst = float(dev @ dev)
    degenerate = sst == 0.0
    r2 = 0.0 if degenerate else 1.0 - sse / sst
    return math.sqrt(sse / t.size), float(np.abs(resid).mean()), r2, degenerate


@dataclass(frozen=True)
class MetricSet:
    train_rmse: float
    val_rmse: float
    train_mae: float
    val_mae: float
    train_r2: float
    val_r2: float
    train_loss: float
    val_loss: float
    train_r2_degenerate: bool = False
    val_r2_degenerate: bool = False
    train_rmse_original: float = float("nan")
    val_rmse_original: float = float("nan")

    def get(self, metric):
        return getattr(self, metric)

    def to_dict(self):
        return asdict(self)


def metric_set(y_train, p_train, y_val, p_val, penalty=0.0, inverse=None) -> MetricSet:
    tr = regression_metrics(y_train, p_train)
    va = regression_metrics(y_val, p_val)
    orig = (float("nan"), float("nan"))
    if inverse is not None:
        orig = (
            regression_metrics(inverse(y_train), inverse(p_train))[0],
            regression_metrics(inverse(y_val), inverse(p_val))[0],
        )
    return MetricSet(
        train_rmse=tr[0], val_rmse=va[0], train_mae=tr[1], val_mae=va[1], train_r2=tr[2], val_r2=va[2],
        train_loss=tr[0] ** 2 + penalty, val_loss=va[0] ** 2 + penalty,
        train_r2_degenerate=tr[3], val_r2_degenerate=va[3],
        train_rmse_original=orig[0], val_rmse_original=orig[1],
    )


def crossval_ci(fold_metrics) -> dict:
    """Per-metric mean and 95% half-width across folds."""
    folds = list(fold_metrics)
    if len(folds) < 2:
        raise TooFewFolds("confidence intervals need at least two folds")
    return {m: confidence_interval([f.get(m) for f in folds]) for m in METRICS}


# ---------------------------------------------------------------------------
# splits and folds


def _align_to_timestamp(ts, row):
    """Move a row boundary forward so no timestamp straddles it."""
    while 0 < row < ts.size and ts[row] == ts[row - 1]:
        row += 1
    return row


def split_rows(table: TimeSeriesTable, ratio: float, n_rows: int | None = None):
    """Chronological ``(train, validation)`` row ranges over the first ``n_rows`` rows."""
    if not 0.0 < ratio < 1.0:
        raise ValueError("ratio must lie strictly between 0 and 1")
    n = table.n_rows if n_rows is None else n_rows
    b = n - int(round(ratio * n))
    b = _align_to_timestamp(table.timestamps[:n], b)
    return (0, b), (b, n)


def fold_prefixes(n_rows: int, k: int, timestamps=None) -> list:
    """Row counts of the ``k`` forward-chaining prefixes (the last is ``n_rows``)."""
    if k < 1:
        raise TooFewFolds("k must be at least 1")
    out = []
    for j in range(1, k + 1):
        m = int(round(n_rows * (1.0 - (k - j) / (2.0 * k))))
        if timestamps is not None:
            m = _align_to_timestamp(timestamps, m)
        out.append(m)
    return out


def fold_seed(seed: int, ratio_index: int, fold: int) -> int:
    return int(np.random.SeedSequence([seed, ratio_index, fold]).generate_state(1)[0])


@dataclass(frozen=True)
class EvalSettings:
    lookback: int = 24
    max_epochs: int = 100
    patience: int = 10
    precision: str = "float32"
    options: PipelineOptions = field(default_factory=PipelineOptions)

    def to_dict(self):
        d = asdict(self)
        d["options"] = self.options.to_dict()
        return d


@dataclass
class PreparedSplit:
    """A fitted plan and its windows for one (prefix, ratio) split."""

    ratio: float
    train_range: tuple
    val_range: tuple
    plan: object
    design: object
    groups: object  # per-row group labels or None
    X_train: np.ndarray
    y_train: np.ndarray
    rows_train: np.ndarray
    X_val: np.ndarray
    y_val: np.ndarray
    rows_val: np.ndarray

    @property
    def train_max_timestamp(self):
        return self.design.timestamps[self.train_range[1] - 1]

    @property
    def val_min_timestamp(self):
        return self.design.timestamps[self.val_range[0]]


def _group_windows(X, y, groups, lookback, start, stop):
    rows = np.arange(start, stop)
    keys = [None] if groups is None else sorted(set(groups[start:stop]), key=str)
    Ws, ts, rs = [], [], []
    for key in keys:
        r = rows if key is None else rows[groups[start:stop] == key]
        if r.size <= lookback:
            continue
        W, t = make_windows(X[r], y[r], lookback)
        Ws.append(W)
        ts.append(t)
        rs.append(r[lookback:])
    if not Ws:
        raise SplitTooSmall(f"rows {start}..{stop} are too few for lookback {lookback}")
    rows_out = np.concatenate(rs)
    order = np.argsort(rows_out, kind="stable")
    return np.concatenate(Ws)[order], np.concatenate(ts)[order], rows_out[order]


def prepare_split(table: TimeSeriesTable, target: str, ratio: float, settings: EvalSettings, n_rows=None) -> PreparedSplit:
    """Fit the transform plan on the training rows and window both partitions."""
    n = table.n_rows if n_rows is None else n_rows
    sub = table if n == table.n_rows else table.take(slice(0, n))
    train_range, val_range = split_rows(sub, ratio)
    L = settings.lookback
    if train_range[1] - train_range[0] <= L or val_range[1] - val_range[0] <= L:
        raise SplitTooSmall(f"split at ratio {ratio} leaves a partition with at most {L} rows")
    groups = sub.group_values()
    groups = None if groups is None else np.asarray(groups, dtype=object)
    plan = fit_plan(sub, target, train_range, settings.options)
    design = apply_plan(plan, sub)
    Xt, yt, rt = _group_windows(design.X, design.y, groups, L, *train_range)
    Xv, yv, rv = _group_windows(design.X, design.y, groups, L, *val_range)
    return PreparedSplit(ratio, train_range, val_range, plan, design, groups, Xt, yt, rt, Xv, yv, rv)


@dataclass
class SplitOutcome:
    metrics: MetricSet
    n_params: int
    val_rows: np.ndarray
    val_actual: np.ndarray
    val_pred: np.ndarray
    history: list = field(default_factory=list)
    stopped_epoch: int = 0
    arima: dict | None = None


def _inverse(prep: PreparedSplit):
    params = prep.plan.get("scaling")
    return lambda v: scale(v, params, "inverse", prep.plan.target)


def _run_arima(spec: ModelSpec, prep: PreparedSplit) -> SplitOutcome:
    y = prep.design.y
    lo, b = prep.train_range
    _, hi = prep.val_range
    groups = prep.groups
    keys = [None] if groups is None else sorted(set(groups[lo:hi]), key=str)
    pt, yt_list, pv, yv_list, rows_v, fitted = [], [], [], [], [], {}
    for key in keys:
        rows = np.arange(lo, hi) if key is None else np.flatnonzero(groups[:hi] == key)
        series = y[rows]
        n_train = int(np.sum(rows < b))
        params, fc = arima_fit_forecast(series, spec.arima_order, n_train)
        insample = one_step_predictions(series[:n_train], params)
        ok = ~np.isnan(insample)
        pt.append(insample[ok])
        yt_list.append(series[:n_train][ok])
        pv.append(fc)
        yv_list.append(series[n_train:])
        rows_v.append(rows[n_train:])
        fitted[str(key)] = params.to_dict()
    rows_v = np.concatenate(rows_v)
    order = np.argsort(rows_v, kind="stable")
    p_val = np.concatenate(pv)[order]
    y_val = np.concatenate(yv_list)[order]
    m = metric_set(np.concatenate(yt_list), np.concatenate(pt), y_val, p_val, 0.0, _inverse(prep))
    n_params = spec.arima_order[0] + spec.arima_order[2] + 1
    return SplitOutcome(m, n_params, rows_v[order], y_val, p_val, arima=fitted)


def evaluate_prepared(spec: ModelSpec, prep: PreparedSplit, seed: int, settings: EvalSettings) -> SplitOutcome:
    """Train ``spec`` on a prepared split and score it on the normalized scale."""
    if spec.family == "arima":
        return _run_arima(spec, prep)
    d = prep.X_train.shape[2]
    model = build_model(spec, settings.lookback, d, seed).astype(np.dtype(settings.precision))
    cfg = spec.train_config(seed=seed, max_epochs=settings.max_epochs, patience=settings.patience, lookback=settings.lookback)
    result = fit(model, (prep.X_train, prep.y_train), (prep.X_val, prep.y_val), cfg)
    p_train = predict(model, prep.X_train)
    p_val = predict(model, prep.X_val)
    penalty, _ = l2_penalty([w.astype(float) for w in model.weights()], cfg.l2_lambda)
    m = metric_set(prep.y_train, p_train, prep.y_val, p_val, penalty, _inverse(prep))
    return SplitOutcome(m, count_parameters(model), prep.rows_val, prep.y_val.astype(float), p_val, result.history, result.stopped_epoch)


def evaluate_split(spec: ModelSpec, table: TimeSeriesTable, target: str, ratio: float, seed: int, settings: EvalSettings | None = None) -> SplitOutcome:
    """Fit the plan on the training portion of one chronological split, train, and score."""
    settings = settings or EvalSettings()
    return evaluate_prepared(spec, prepare_split(table, target, ratio, settings), seed, settings)


# ---------------------------------------------------------------------------
# the sweep


@dataclass
class SweepCell:
    label: str
    family: str
    ratio: float
    folds: list = field(default_factory=list)
    status: str = "ok"
    error: str | None = None
    n_params: int | None = None
    last: SplitOutcome | None = None

    @property
    def k(self):
        return len(self.folds)

    def mean(self, metric) -> float:
        return float(np.mean([f.get(metric) for f in self.folds]))

    def ci(self, metric) -> ConfidenceInterval | None:
        if len(self.folds) < 2:
            return None
        return confidence_interval([f.get(metric) for f in self.folds])

    def degenerate(self) -> bool:
        return any(f.val_r2_degenerate or f.train_r2_degenerate for f in self.folds)


@dataclass
class RatioSweepReport:
    labels: list
    ratios: list
    k: int
    cells: dict  # (label, ratio) -> SweepCell
    specs: dict  # label -> ModelSpec
    plans: dict = field(default_factory=dict)  # "ratio/fold" -> plan dict
    seeds: dict = field(default_factory=dict)

    def cell(self, label, ratio) -> SweepCell:
        return self.cells[(label, ratio)]

    def ordered_cells(self):
        return [self.cells[(label, r)] for label in self.labels for r in self.ratios]

    @property
    def n_failed(self):
        return sum(c.status != "ok" for c in self.cells.values())


def _cell_task(args):
    spec, prep, seed, settings = args
    try:
        return evaluate_prepared(spec, prep, seed, settings), None
    except Exception as exc:  # recorded per cell; the sweep carries on
        return None, f"{type(exc).__name__}: {exc}"


def ratio_sweep(specs, table: TimeSeriesTable, target: str, ratios=RATIOS, k: int = 5, seed: int = 0,
                settings: EvalSettings | None = None, jobs: int = 1, progress=None) -> RatioSweepReport:
    """Evaluate every spec at every ratio over ``k`` forward-chaining folds.

    ``specs`` is a list of :class:`ModelSpec`; their ``label`` values must be
    unique. Failures mark the cell and do not stop the sweep.
    """
    settings = settings or EvalSettings()
    specs = list(specs)
    if not specs:
        raise ValueError("at least one model spec is required")
    labels = [s.label for s in specs]
    if len(set(labels)) != len(labels):
        raise ValueError(f"duplicate model labels {labels}")
    ratios = [float(r) for r in ratios]
    report = RatioSweepReport(labels, ratios, k, {}, dict(zip(labels, specs)))
    for s in specs:
        for r in ratios:
            report.cells[(s.label, r)] = SweepCell(s.label, s.family, r)
    prefixes = fold_prefixes(table.n_rows, k, table.timestamps)
    pool = ProcessPoolExecutor(max_workers=jobs) if jobs > 1 else None
    try:
        for ri, ratio in enumerate(ratios):
            for fold, n_rows in enumerate(prefixes):
                key = f"{ratio:g}/{fold + 1}"
                s_fold = fold_seed(seed, ri, fold)
                report.seeds[key] = s_fold
                try:
                    prep = prepare_split(table, target, ratio, settings, n_rows)
                except Exception as exc:
                    for s in specs:
                        _fail(report.cells[(s.label, ratio)], f"{type(exc).__name__}: {exc}")
                    continue
                report.plans[key] = prep.plan.to_dict()
                live = [s for s in specs if report.cells[(s.label, ratio)].status == "ok"]
                tasks = [(s, prep, s_fold, settings) for s in live]
                results = list(pool.map(_cell_task, tasks)) if pool else [_cell_task(t) for t in tasks]
                for s, (outcome, err) in zip(live, results):
                    cell = report.cells[(s.label, ratio)]
                    if err is not None:
                        _fail(cell, err)
                        continue
                    cell.folds.append(outcome.metrics)
                    cell.n_params = outcome.n_params
                    cell.last = outcome
                    if progress:
                        progress(cell, fold + 1)
    finally:
        if pool:
            pool.shutdown()
    return report


def _fail(cell: SweepCell, message: str):
    cell.status = "failed"
    cell.error = message
    cell.folds = []
    cell.last = None


# ---------------------------------------------------------------------------
# Friedman comparison and report files


def metric_matrix(report: RatioSweepReport, metric: str):
    """Blocks (ratios) x models matrix of cell means, rounded exactly as the CSV prints them."""
    labels = [lab for lab in report.labels if all(report.cell(lab, r).status == "ok" for r in report.ratios)]
    M = np.array([[float(fmt(report.cell(lab, r).mean(metric))) for lab in labels] for r in report.ratios])
    return labels, M


def friedman_table(report: RatioSweepReport) -> dict:
    """Friedman test per metric; empty when fewer than 2 models or 2 ratios succeeded."""
    out = {}
    for metric in METRICS:
        labels, M = metric_matrix(report, metric)
        if M.shape[0] < 2 or len(labels) < 2:
            return {}
        out[metric] = friedman_test(M, lower_is_better=LOWER_IS_BETTER[metric])
    return out


def metrics_csv_text(report: RatioSweepReport) -> str:
    with_ci = report.k >= 2
    header = ["model", "ratio"]
    for m in METRICS:
        header += [m, f"{m}_ci"] if with_ci else [m]
    header += ["train_rmse_original", "val_rmse_original", "r2_degenerate", "folds", "status"]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for cell in report.ordered_cells():
        row = [cell.label, fmt(cell.ratio)]
        ok = cell.status == "ok" and cell.folds
        for m in METRICS:
            row.append(fmt(cell.mean(m)) if ok else "")
            if with_ci:
                ci = cell.ci(m) if ok else None
                row.append(fmt(ci.half_width) if ci else "")
        row += [
            fmt(cell.mean("train_rmse_original")) if ok else "",
            fmt(cell.mean("val_rmse_original")) if ok else "",
            str(bool(ok and cell.degenerate())).lower(),
            str(cell.k),
            cell.status,
        ]
        w.writerow(row)
    return buf.getvalue()


def folds_csv_text(report: RatioSweepReport) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["model", "ratio", "fold", *METRICS])
    for cell in report.ordered_cells():
        for j, f in enumerate(cell.folds, 1):
            w.writerow([cell.label, fmt(cell.ratio), j, *(repr(float(f.get(m))) for m in METRICS)])
    return buf.getvalue()


def friedman_csv_text(results: dict) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["metric", "df", "chi_squared", "p_value"])
    for metric in METRICS:
        if metric in results:
            r: FriedmanResult = results[metric]
            w.writerow([METRIC_LABELS[metric], r.df, fmt(r.chi_squared), fmt(r.p_value)])
    return buf.getvalue()


def params_csv_text(report: RatioSweepReport) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["model", "family", "parameter_count", "published_range"])
    for label in report.labels:
        counts = [report.cell(label, r).n_params for r in report.ratios if report.cell(label, r).n_params is not None]
        spec = report.specs[label]
        w.writerow([label, spec.family, counts[-1] if counts else "", PUBLISHED_PARAM_RANGES.get(spec.family, "")])
    return buf.getvalue()


def _slug(text: str) -> str:
    return "".join(ch if ch.isalnum() else "_" for ch in text).strip("_").lower()


def plot_predictions(cell: SweepCell, path: Path, tail: int = PLOT_TAIL):
    """Line plot of actual vs predicted over the last ``tail`` validation points."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    out = cell.last
    actual, pred = out.val_actual[-tail:], out.val_pred[-tail:]
    with matplotlib.rc_context({"svg.hashsalt": "renewcast", "svg.fonttype": "none"}):
        fig, ax = plt.subplots(figsize=(9, 3.5))
        x = np.arange(actual.size)
        ax.plot(x, actual, color="0.3", lw=1.0, label="actual")
        ax.plot(x, pred, color="tab:blue", lw=1.0, label="predicted")
        ax.set_title(f"{cell.label} at {cell.ratio * 100:.0f}% validation")
        ax.set_xlabel("validation step")
        ax.set_ylabel("normalized target")
        ax.legend(loc="upper right", frameon=False)
        fig.tight_layout()
        fig.savefig(path, format="svg", metadata={"Date": None})
        plt.close(fig)


def emit_report(report: RatioSweepReport, out_dir, friedman: dict | None = None, manifest: dict | None = None, plots: bool = True) -> dict:
    """Write metrics.csv, folds.csv, friedman.csv, params.csv, plots/*.svg and (optionally) manifest.json.

    Returns a mapping of file role to path. Output depends only on the
    report contents, so re-emitting gives byte-identical files.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    friedman = friedman_table(report) if friedman is None else friedman
    files = {
        "metrics": out / "metrics.csv",
        "folds": out / "folds.csv",
        "friedman": out / "friedman.csv",
        "params": out / "params.csv",
    }
    files["metrics"].write_text(metrics_csv_text(report))
    files["folds"].write_text(folds_csv_text(report))
    files["friedman"].write_text(friedman_csv_text(friedman))
    files["params"].write_text(params_csv_text(report))
    if manifest is not None:
        files["manifest"] = out / "manifest.json"
        write_json(files["manifest"], manifest)
    if plots:
        plot_dir = out / "plots"
        plot_dir.mkdir(exist_ok=True)
        for cell in report.ordered_cells():
            if cell.last is not None:
                path = plot_dir / f"{_slug(cell.label)}_{int(round(cell.ratio * 100))}.svg"
                plot_predictions(cell, path)
                files[f"plot:{cell.label}:{cell.ratio:g}"] = path
    return files


def write_json(path, doc):
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True, default=_json_default) + "\n")


def _json_default(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if hasattr(obj, "to_dict"):
        return obj.to_dict()
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def report_summary(report: RatioSweepReport) -> dict:
    """JSON-ready sweep results, enough to re-emit every CSV without retraining."""
    cells = []
    for c in report.ordered_cells():
        cells.append({
            "label": c.label, "family": c.family, "ratio": c.ratio, "status": c.status, "error": c.error,
            "n_params": c.n_params, "folds": [f.to_dict() for f in c.folds],
        })
    return {"labels": report.labels, "ratios": report.ratios, "k": report.k, "cells": cells,
            "specs": {k: v.to_dict() for k, v in report.specs.items()}}


def report_from_summary(summary: dict) -> RatioSweepReport:
    specs = {k: ModelSpec.from_dict(v) for k, v in summary["specs"].items()}
    cells = {}
    for c in summary["cells"]:
        cell = SweepCell(c["label"], c["family"], float(c["ratio"]), [MetricSet(**f) for f in c["folds"]], c["status"], c["error"], c["n_params"])
        cells[(cell.label, cell.ratio)] = cell
    return RatioSweepReport(list(summary["labels"]), [float(r) for r in summary["ratios"]], int(summary["k"]), cells, specs)
