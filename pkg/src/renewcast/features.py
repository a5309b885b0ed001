"""Feature transforms fitted on training rows and replayed everywhere else.

Every fitted quantity (imputation fills, encoder maps, differencing orders,
min/max, correlation drops, PCA basis) is computed from the training slice
only; :class:`TransformPlan` records them so a run can be replayed exactly.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DegenerateSeries,
    EmptyTrainRange,
    NoTimestamp,
    SingularDesign,
    StillNonStationary,
    TargetMissingInTrain,
    TooShort,
    UnfittedColumn,
    ZeroVarianceTarget,
)
from .ingest import (
    CATEGORICAL,
    CONTINUOUS,
    TARGET,
    ColumnMeta,
    TimeSeriesTable,
    impute_gaps,
    imputation_stats,
)
from .stats.pca import PcaModel, pca_fit, pca_project
from .stats.unitroot import StationarityReport, stationarity_report

MAX_DIFF_ORDER = 2


def _rows(train_rows, n):
    if isinstance(train_rows, slice):
        idx = np.arange(n)[train_rows]
    elif isinstance(train_rows, tuple) and len(train_rows) == 2:
        idx = np.arange(train_rows[0], train_rows[1])
    else:
        idx = np.asarray(train_rows, dtype=np.intp)
    if idx.size == 0:
        raise EmptyTrainRange("training range is empty")
    return idx


def chronological_split(n_rows: int, ratio: float):
    """Row ranges ``(train, validation)``; validation is the final ``ratio`` of rows."""
    if not 0.0 < ratio < 1.0:
        raise ValueError("ratio must lie strictly between 0 and 1")
    n_val = int(round(ratio * n_rows))
    n_train = n_rows - n_val
    return (0, n_train), (n_train, n_rows)


# ---------------------------------------------------------------------------
# min-max scaling


@dataclass(frozen=True)
class ScalingParams:
    bounds: dict  # column name -> (min, max)

    @property
    def columns(self):
        return list(self.bounds)

    def to_dict(self):
        return {k: [float(a), float(b)] for k, (a, b) in self.bounds.items()}

    @classmethod
    def from_dict(cls, d):
        return cls({k: (float(v[0]), float(v[1])) for k, v in d.items()})


def fit_minmax(table: TimeSeriesTable, train_rows, columns=None) -> ScalingParams:
    idx = _rows(train_rows, table.n_rows)
    if columns is None:
        columns = table.names_of_kind(CONTINUOUS, TARGET)
    bounds = {}
    for name in columns:
        part = table.column(name)[idx]
        part = part[~np.isnan(part)]
        if part.size == 0:
            raise EmptyTrainRange(f"column {name!r} has no observed training values")
        bounds[name] = (float(part.min()), float(part.max()))
    return ScalingParams(bounds)


def scale(values, params: ScalingParams, direction: str = "forward", column: str | None = None):
    """Min-max map to [0, 1] (``forward``) or back to original units (``inverse``).

    Constant training columns (max == min) map to 0.0 and invert to the constant.
    """
    if column is None:
        if len(params.bounds) != 1:
            raise UnfittedColumn("column name required for multi-column scaling params")
        column = next(iter(params.bounds))
    if column not in params.bounds:
        raise UnfittedColumn(f"no scaling parameters for column {column!r}")
    lo, hi = params.bounds[column]
    x = np.asarray(values, dtype=float)
    span = hi - lo
    if direction == "forward":
        return np.zeros_like(x) if span == 0 else (x - lo) / span
    if direction == "inverse":
        return lo + x * span
    raise ValueError("direction must be 'forward' or 'inverse'")


# ---------------------------------------------------------------------------
# leave-one-out encoding


@dataclass(frozen=True)
class LooEncoderMap:
    stats: dict  # category -> (target_sum, count)
    global_target_mean: float

    def encode(self, category) -> float:
        if category in self.stats:
            total, count = self.stats[category]
            return total / count
        return self.global_target_mean

    def to_dict(self):
        return {
            "stats": {k: [float(s), int(c)] for k, (s, c) in sorted(self.stats.items())},
            "global_target_mean": float(self.global_target_mean),
        }

    @classmethod
    def from_dict(cls, d):
        return cls({k: (float(v[0]), int(v[1])) for k, v in d["stats"].items()}, float(d["global_target_mean"]))


def fit_loo(categories, target, train_idx) -> LooEncoderMap:
    cats = np.asarray(categories, dtype=object)[train_idx]
    y = np.asarray(target, dtype=float)[train_idx]
    if np.isnan(y).any():
        raise TargetMissingInTrain("target has missing training values")
    stats = {}
    for c, t in zip(cats, y):
        if c is None:
            continue
        s, k = stats.get(c, (0.0, 0))
        stats[c] = (s + float(t), k + 1)
    return LooEncoderMap(stats, float(y.mean()))


def apply_loo(encoder: LooEncoderMap, categories, target, train_idx) -> np.ndarray:
    """Training rows of a category seen at least twice exclude their own target."""
    cats = np.asarray(categories, dtype=object)
    y = np.asarray(target, dtype=float)
    out = np.array([encoder.encode(c) for c in cats], dtype=float)
    for i in np.asarray(train_idx):
        c = cats[i]
        if c in encoder.stats:
            total, count = encoder.stats[c]
            if count >= 2:
                out[i] = (total - y[i]) / (count - 1)
    return out


def loo_encode(table: TimeSeriesTable, cat_column: str, target_column: str, train_rows):
    """Leave-one-out encode ``cat_column`` against ``target_column``.

    Returns the encoded vector and the fitted map. Singletons, rows outside
    the training range and unseen categories use the map without exclusion
    (unseen categories take the global training mean).
    """
    idx = _rows(train_rows, table.n_rows)
    encoder = fit_loo(table.column(cat_column), table.column(target_column), idx)
    return apply_loo(encoder, table.column(cat_column), table.column(target_column), idx), encoder


# ---------------------------------------------------------------------------
# calendar features

CALENDAR_COLUMNS = ("sine_hr", "cos_hr", "sine_mon", "cos_mon", "is_weekend", "Season_Spring", "Season_Summer", "Season_Winter")
_SEASON = {12: "Winter", 1: "Winter", 2: "Winter", 3: "Spring", 4: "Spring", 5: "Spring", 6: "Summer", 7: "Summer", 8: "Summer"}


def calendar_fields(timestamps):
    """Hour, month (1-12) and ISO weekday (Mon=0) of datetime64 values."""
    ts = np.asarray(timestamps, dtype="datetime64[s]")
    hours = ((ts - ts.astype("datetime64[D]")) // np.timedelta64(1, "h")).astype(int)
    months = ts.astype("datetime64[M]").astype(int) % 12 + 1
    # 1970-01-01 was a Thursday (weekday 3)
    weekday = (ts.astype("datetime64[D]").astype(int) + 3) % 7
    return hours, months, weekday


def add_cyclical_calendar(table: TimeSeriesTable) -> TimeSeriesTable:
    """Append hour/month sine-cosine pairs, a weekend flag and spring/summer/winter flags."""
    if table.timestamp_name is None:
        raise NoTimestamp("table has no timestamp column")
    hours, months, weekday = calendar_fields(table.timestamps)
    hour_phase = 2 * np.pi * hours / 24.0
    month_phase = 2 * np.pi * (months - 1) / 12.0
    seasons = np.array([_SEASON.get(m, "Autumn") for m in months])
    new = {
        "sine_hr": np.sin(hour_phase),
        "cos_hr": np.cos(hour_phase),
        "sine_mon": np.sin(month_phase),
        "cos_mon": np.cos(month_phase),
        "is_weekend": (weekday >= 5).astype(float),
        "Season_Spring": (seasons == "Spring").astype(float),
        "Season_Summer": (seasons == "Summer").astype(float),
        "Season_Winter": (seasons == "Winter").astype(float),
    }
    out = table
    for name, values in new.items():
        out = out.with_column(ColumnMeta(name, CONTINUOUS), values)
    return out


# ---------------------------------------------------------------------------
# stationarity adjustment


def _retest(series) -> str:
    try:
        return stationarity_report(series).verdict
    except (DegenerateSeries, SingularDesign):
        # a constant series is trivially stationary
        return "stationary"


def difference(series, order: int):
    """``order``-th difference plus the head values needed to undo it."""
    x = np.asarray(series, dtype=float)
    heads = []
    for _ in range(order):
        heads.append(float(x[0]))
        x = np.diff(x)
    return x, heads


def undifference(diffed, heads):
    """Invert :func:`difference` by cumulative summation."""
    x = np.asarray(diffed, dtype=float)
    for head in reversed(heads):
        x = np.concatenate([[head], head + np.cumsum(x)])
    return x


def stationarize(series, report: StationarityReport, max_order: int = MAX_DIFF_ORDER, tester=_retest):
    """Difference until the joint verdict is stationary.

    Returns the transformed series (shorter by the applied order) and the
    order. Raises ``StillNonStationary`` if ``max_order`` differences do not
    suffice.
    """
    x = np.asarray(series, dtype=float)
    if report.verdict == "stationary":
        return x.copy(), 0
    for order in range(1, max_order + 1):
        x = np.diff(x)
        try:
            verdict = tester(x)
        except TooShort:
            break
        if verdict == "stationary":
            return x, order
    raise StillNonStationary(f"series is still non-stationary after {max_order} differences")


# ---------------------------------------------------------------------------
# correlation filter


def pearson(x, y) -> float:
    x = np.asarray(x, dtype=float) - np.mean(x)
    y = np.asarray(y, dtype=float) - np.mean(y)
    den = np.sqrt(float(x @ x) * float(y @ y))
    return 0.0 if den == 0 else float(x @ y) / den


def correlation_matrix(table: TimeSeriesTable, names, train_rows=None):
    idx = _rows(train_rows if train_rows is not None else slice(None), table.n_rows)
    M = np.column_stack([table.column(n)[idx] for n in names])
    sd = M.std(axis=0)
    Z = np.where(sd > 0, (M - M.mean(axis=0)) / np.where(sd > 0, sd, 1.0), 0.0)
    C = Z.T @ Z / len(idx)
    np.fill_diagonal(C, np.where(sd > 0, 1.0, 0.0))
    return np.clip(C, -1.0, 1.0)


def correlation_filter(table: TimeSeriesTable, target_column: str, threshold: float = 0.1, train_rows=None, features=None):
    """Drop continuous features whose |Pearson r| with the target is below ``threshold``.

    Correlations use training rows only. Returns ``(table, dropped)``.
    """
    idx = _rows(train_rows if train_rows is not None else slice(None), table.n_rows)
    y = table.column(target_column)[idx]
    if np.std(y) == 0:
        raise ZeroVarianceTarget(f"target {target_column!r} is constant on the training rows")
    if features is None:
        features = [n for n in table.names_of_kind(CONTINUOUS)]
    dropped = [n for n in features if abs(pearson(table.column(n)[idx], y)) < threshold]
    return table.drop(dropped), dropped


# ---------------------------------------------------------------------------
# the fitted plan


@dataclass
class PipelineOptions:
    impute: bool = True
    calendar: bool = True
    encode: bool = True
    stationarize: bool = True
    correlation_filter: bool = True
    correlation_threshold: float = 0.1
    pca: bool = True
    variance_target: float = 0.80
    include_target_history: bool = True

    def to_dict(self):
        return dict(self.__dict__)


@dataclass
class TransformPlan:
    """Ordered record of every transform fitted on ``fit_row_range``."""

    target: str
    fit_row_range: tuple
    options: PipelineOptions
    records: list = field(default_factory=list)
    _frozen: bool = False

    def append(self, kind, payload):
        if self._frozen:
            raise RuntimeError("plan is frozen once fitting ends")
        self.records.append((kind, payload))

    def freeze(self):
        self._frozen = True
        return self

    def get(self, kind, default=None):
        for k, payload in self.records:
            if k == kind:
                return payload
        return default

    @property
    def feature_names(self):
        return self.get("features")

    def to_dict(self):
        out = []
        for kind, payload in self.records:
            if hasattr(payload, "to_dict"):
                payload = payload.to_dict()
            elif kind == "loo":
                payload = {k: v.to_dict() for k, v in payload.items()}
            elif kind == "correlation":
                payload = {"dropped": payload["dropped"], "names": payload["names"], "matrix": np.round(payload["matrix"], 12).tolist()}
            out.append({"transform": kind, "params": payload})
        return {
            "target": self.target,
            "fit_row_range": list(self.fit_row_range),
            "options": self.options.to_dict(),
            "transforms": out,
        }


@dataclass
class Design:
    """Model-ready arrays produced by replaying a plan."""

    X: np.ndarray  # (n, d) scaled inputs
    y: np.ndarray  # (n,) scaled target
    y_raw: np.ndarray  # (n,) target in original units
    feature_names: list
    timestamps: np.ndarray


def _encode_and_calendar(plan: TransformPlan, table: TimeSeriesTable, fit_idx, fitting: bool) -> TimeSeriesTable:
    opts = plan.options
    target = plan.target
    if opts.impute:
        if fitting:
            plan.append("impute", imputation_stats(table, fit_idx))
        table = impute_gaps(table, plan.get("impute"), boundary=plan.fit_row_range[1])
    if opts.calendar:
        if fitting:
            plan.append("calendar", {"columns": list(CALENDAR_COLUMNS)})
        table = add_cyclical_calendar(table)
    cats = table.names_of_kind(CATEGORICAL)
    if opts.encode and cats:
        if fitting:
            plan.append("loo", {c: fit_loo(table.column(c), table.column(target), fit_idx) for c in cats})
        encoders = plan.get("loo")
        for c in cats:
            codes = apply_loo(encoders[c], table.column(c), table.column(target), fit_idx)
            table = table.with_column(ColumnMeta(f"{c}_loo", CONTINUOUS), codes)
    group = table.group_column
    table = table.drop([c for c in cats if c != group])
    if group is not None:
        table = table.drop([group])
    return table


def _difference_column(values, order):
    if order == 0:
        return values
    d = values.copy()
    for _ in range(order):
        d = np.diff(d)
    # leading rows lose their predecessors; back-fill with the first defined change
    return np.concatenate([np.full(order, d[0]), d])


# sine/cosine columns that jointly encode one phase; filtered as a unit
CYCLIC_PAIRS = (("sine_hr", "cos_hr"), ("sine_mon", "cos_mon"))


def _keep_cyclic_pairs(dropped, features):
    """Re-admit half of a sine/cosine pair whose partner survived the filter.

    Either half alone is ambiguous about the phase (sin t = sin (pi - t)), so
    a pair is dropped only when both halves fall below the threshold.
    """
    keep = set()
    for a, b in CYCLIC_PAIRS:
        if a in features and b in features and (a in dropped) != (b in dropped):
            keep.update((a, b))
    return [n for n in dropped if n not in keep]


def fit_plan(table: TimeSeriesTable, target: str, train_rows, options: PipelineOptions | None = None) -> TransformPlan:
    """Fit every enabled transform on ``train_rows`` and return the frozen plan."""
    options = options or PipelineOptions()
    idx = _rows(train_rows, table.n_rows)
    plan = TransformPlan(target, (int(idx.min()), int(idx.max()) + 1), options)
    table = _encode_and_calendar(plan, table, idx, fitting=True)
    features = [n for n in table.names_of_kind(CONTINUOUS)]

    if options.stationarize:
        orders, reports = {}, {}
        for name in features:
            part = table.column(name)[idx]
            try:
                rep = stationarity_report(part)
            except (DegenerateSeries, SingularDesign, TooShort):
                orders[name] = 0
                continue
            reports[name] = rep.to_dict()
            try:
                _, orders[name] = stationarize(part, rep)
            except StillNonStationary:
                orders[name] = MAX_DIFF_ORDER
        plan.append("stationarity", {"orders": orders, "reports": reports})
        for name, order in orders.items():
            table = table.replace_values(name, _difference_column(table.column(name), order))

    scaled_cols = features + [target]
    params = fit_minmax(table, idx, scaled_cols)
    plan.append("scaling", params)
    scaled = {n: scale(table.column(n), params, "forward", n) for n in scaled_cols}

    if options.correlation_filter and features:
        y = scaled[target][idx]
        if np.std(y) == 0:
            raise ZeroVarianceTarget(f"target {target!r} is constant on the training rows")
        dropped = [n for n in features if abs(pearson(scaled[n][idx], y)) < options.correlation_threshold]
        dropped = _keep_cyclic_pairs(dropped, features)
        C = correlation_matrix(table, features, idx) if len(features) > 1 else np.ones((1, 1))
        plan.append("correlation", {"dropped": dropped, "names": list(features), "matrix": C})
        features = [n for n in features if n not in dropped]

    plan.append("features", list(features))
    if options.pca and len(features) >= 2:
        M = np.column_stack([scaled[n][idx] for n in features])
        plan.append("pca", pca_fit(M, options.variance_target))
    return plan.freeze()


def apply_plan(plan: TransformPlan, table: TimeSeriesTable) -> Design:
    """Replay a fitted plan on ``table`` (the same row layout it was fitted on)."""
    lo, hi = plan.fit_row_range
    fit_idx = np.arange(lo, hi)
    table = _encode_and_calendar(plan, table, fit_idx, fitting=False)
    y_raw = table.column(plan.target).copy()
    stat = plan.get("stationarity")
    if stat is not None:
        for name, order in stat["orders"].items():
            table = table.replace_values(name, _difference_column(table.column(name), order))
    params: ScalingParams = plan.get("scaling")
    features = plan.feature_names
    y = scale(table.column(plan.target), params, "forward", plan.target)
    if features:
        M = np.column_stack([scale(table.column(n), params, "forward", n) for n in features])
    else:
        M = np.zeros((table.n_rows, 0))
    names = list(features)
    pca: PcaModel | None = plan.get("pca")
    if pca is not None:
        M = pca_project(pca, M)
        names = [f"pc{i + 1}" for i in range(pca.n_components)]
    if plan.options.include_target_history:
        M = np.column_stack([M, y])
        names.append(f"{plan.target}_history")
    return Design(M, y, y_raw, names, table.timestamps)
