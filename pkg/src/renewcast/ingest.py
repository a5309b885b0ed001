"""Loading, merging, cleaning and synthesising hourly tables.

Missing values are stored as ``NaN`` in float columns and ``None`` in
categorical columns. Real zeros are data (solar output is zero at night), so
no numeric sentinel is ever used.
"""
from __future__ import annotations

import csv
import math
from collections import Counter
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import (
    AllColumnsDropped,
    AllMissingColumn,
    DuplicateTimestamp,
    EmptyFile,
    FrequencyMismatch,
    InvalidSyntheticSpec,
    MissingColumn,
    NoOverlap,
)

CONTINUOUS = "continuous"
CATEGORICAL = "categorical"
TARGET = "target"
TIMESTAMP = "timestamp"
KINDS = (CONTINUOUS, CATEGORICAL, TARGET, TIMESTAMP)

HOUR = np.timedelta64(3600, "s")
# runs longer than this fall back to mean/mode imputation
MAX_FFILL_RUN = 3


@dataclass(frozen=True)
class ColumnMeta:
    name: str
    kind: str
    missing_fraction: float = 0.0
    unit: str = ""

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown column kind {self.kind!r}")
        if not 0.0 <= self.missing_fraction <= 1.0:
            raise ValueError("missing_fraction must lie in [0, 1]")


def _is_missing(values: np.ndarray, kind: str) -> np.ndarray:
    if kind == CATEGORICAL:
        return np.array([v is None for v in values], dtype=bool)
    if kind == TIMESTAMP:
        return np.isnat(values)
    return np.isnan(values)


def _freeze(values: np.ndarray) -> np.ndarray:
    values = np.array(values, copy=True)
    values.flags.writeable = False
    return values


class TimeSeriesTable:
    """Immutable, timestamp-ordered columnar table with per-column metadata.

    Parameters
    ----------
    columns : sequence of (ColumnMeta, array)
        Exactly one column must have kind ``"timestamp"``.
    frequency : {"hourly", "irregular"} or None
        Inferred from the timestamps when omitted.
    group_column : str, optional
        Categorical column identifying parallel series (e.g. a site name).
        Timestamps must then be unique per group instead of globally.
    """

    def __init__(self, columns, frequency=None, group_column=None):
        cols = {}
        n_rows = None
        ts_name = None
        for meta, values in columns:
            if meta.name in cols:
                raise ValueError(f"duplicate column name {meta.name!r}")
            if meta.kind == TIMESTAMP:
                if ts_name is not None:
                    raise ValueError("exactly one timestamp column is allowed")
                ts_name = meta.name
                values = np.asarray(values, dtype="datetime64[s]")
            elif meta.kind == CATEGORICAL:
                values = np.array([None if v is None else str(v) for v in values], dtype=object)
            else:
                values = np.asarray(values, dtype=float)
                if np.isinf(values).any():
                    raise ValueError(f"column {meta.name!r} holds non-finite values")
            if values.ndim != 1:
                raise ValueError(f"column {meta.name!r} must be one-dimensional")
            if n_rows is None:
                n_rows = len(values)
            elif len(values) != n_rows:
                raise ValueError(f"column {meta.name!r} has {len(values)} rows, expected {n_rows}")
            cols[meta.name] = (meta, _freeze(values))
        if ts_name is None:
            raise ValueError("table needs exactly one timestamp column")
        if group_column is not None and (group_column not in cols or cols[group_column][0].kind != CATEGORICAL):
            raise ValueError(f"group column {group_column!r} must be a categorical column")
        self._cols = cols
        self._ts = ts_name
        self.group_column = group_column
        self.n_rows = int(n_rows or 0)
        ts = cols[ts_name][1]
        if np.isnat(ts).any():
            raise ValueError("timestamp column contains missing values")
        if self.n_rows > 1 and (np.diff(ts) < np.timedelta64(0, "s")).any():
            raise ValueError("timestamps must be nondecreasing")
        if frequency is None:
            frequency = _infer_frequency(ts, self.group_values())
        if frequency not in ("hourly", "irregular"):
            raise ValueError(f"unknown frequency {frequency!r}")
        self.frequency = frequency

    # -- accessors -----------------------------------------------------
    @property
    def names(self) -> list[str]:
        return list(self._cols)

    @property
    def timestamp_name(self) -> str:
        return self._ts

    @property
    def timestamps(self) -> np.ndarray:
        return self._cols[self._ts][1]

    def __contains__(self, name) -> bool:
        return name in self._cols

    def __len__(self) -> int:
        return self.n_rows

    def __getitem__(self, name) -> np.ndarray:
        return self.column(name)

    def column(self, name) -> np.ndarray:
        try:
            return self._cols[name][1]
        except KeyError:
            raise MissingColumn(name) from None

    def meta(self, name) -> ColumnMeta:
        try:
            return self._cols[name][0]
        except KeyError:
            raise MissingColumn(name) from None

    def metas(self) -> list[ColumnMeta]:
        return [m for m, _ in self._cols.values()]

    def names_of_kind(self, *kinds) -> list[str]:
        return [n for n, (m, _) in self._cols.items() if m.kind in kinds]

    @property
    def target_names(self) -> list[str]:
        return self.names_of_kind(TARGET)

    def group_values(self):
        if self.group_column is None:
            return None
        return self._cols[self.group_column][1]

    def missing_mask(self, name) -> np.ndarray:
        meta, values = self._cols[name]
        return _is_missing(values, meta.kind)

    def items(self):
        return [(m, v) for m, v in self._cols.values()]

    # -- derivation (always returns a new table) ----------------------------
    def _rebuild(self, items, frequency=None, group_column="__keep__"):
        group = self.group_column if group_column == "__keep__" else group_column
        if group is not None and group not in {m.name for m, _ in items}:
            group = None
        return TimeSeriesTable(items, frequency=frequency, group_column=group)

    def with_column(self, meta: ColumnMeta, values) -> TimeSeriesTable:
        items = [(m, v) for m, v in self.items() if m.name != meta.name]
        items.append((meta, values))
        if meta.name in self._cols:
            # keep original column position
            order = self.names
            items.sort(key=lambda it: order.index(it[0].name) if it[0].name in order else len(order))
        return self._rebuild(items, frequency=self.frequency)

    def replace_values(self, name, values) -> TimeSeriesTable:
        return self.with_column(self.meta(name), values)

    def drop(self, names: Iterable[str]) -> TimeSeriesTable:
        names = set(names)
        if self._ts in names:
            raise ValueError("cannot drop the timestamp column")
        return self._rebuild([(m, v) for m, v in self.items() if m.name not in names], frequency=self.frequency)

    def select(self, names: Sequence[str]) -> TimeSeriesTable:
        keep = [self._ts] + [n for n in names if n != self._ts]
        return self._rebuild([self._cols[n] for n in keep], frequency=self.frequency)

    def take(self, rows) -> TimeSeriesTable:
        """Row subset (slice or sorted index array); metadata is carried over."""
        return self._rebuild([(m, v[rows]) for m, v in self.items()])

    def with_kind(self, name, kind) -> TimeSeriesTable:
        return self.with_column(replace(self.meta(name), kind=kind), self.column(name))

    def __repr__(self):
        return f"TimeSeriesTable(n_rows={self.n_rows}, columns={self.names!r}, frequency={self.frequency!r})"

    def equals(self, other: TimeSeriesTable) -> bool:
        if self.names != other.names or self.n_rows != other.n_rows:
            return False
        for name in self.names:
            ma, va = self._cols[name]
            mb, vb = other._cols[name]
            if ma != mb:
                return False
            if ma.kind == CATEGORICAL:
                if list(va) != list(vb):
                    return False
            elif not np.array_equal(va, vb, equal_nan=ma.kind != TIMESTAMP):
                return False
        return True


def _infer_frequency(ts, groups) -> str:
    if len(ts) < 2:
        return "hourly"
    if groups is None:
        segments = [ts]
    else:
        segments = [ts[groups == g] for g in dict.fromkeys(groups)]
    for seg in segments:
        if len(seg) < 2:
            continue
        d = np.diff(seg)
        if (d <= np.timedelta64(0, "s")).any() or (d % HOUR != np.timedelta64(0, "s")).any():
            return "irregular"
    return "hourly"


# ---------------------------------------------------------------------------
# CSV loading


def parse_timestamp(text: str, fmt: str | None = None) -> np.datetime64:
    """Parse an ISO-8601 (or ``fmt``) timestamp; offsets are converted to UTC."""
    text = text.strip()
    if fmt is not None:
        dt = datetime.strptime(text, fmt)
    else:
        dt = datetime.fromisoformat(text.replace("Z", "+00:00"))
    if dt.tzinfo is not None:
        dt = dt.astimezone(timezone.utc).replace(tzinfo=None)
    return np.datetime64(dt.replace(microsecond=0), "s")


def _parse_float(text: str) -> float:
    try:
        value = float(text)
    except (TypeError, ValueError):
        return math.nan
    return value if math.isfinite(value) else math.nan


def table_from_strings(
    raw: dict[str, list[str]],
    schema: Sequence[ColumnMeta],
    timestamp_parser: Callable[[str], np.datetime64] | None = None,
    group_column: str | None = None,
    on_duplicate: str = "error",
) -> TimeSeriesTable:
    """Build a table from raw string cells, computing missing fractions.

    Rows are sorted by timestamp (then group label). ``on_duplicate="first"``
    keeps the first occurrence of a repeated key instead of raising.
    """
    parse_ts = timestamp_parser or parse_timestamp
    n = len(next(iter(raw.values()))) if raw else 0
    if n == 0:
        raise EmptyFile("no data rows")
    items = []
    for meta in schema:
        if meta.name not in raw:
            raise MissingColumn(meta.name)
        cells = raw[meta.name]
        if meta.kind == TIMESTAMP:
            values = np.array([parse_ts(c) for c in cells], dtype="datetime64[s]")
            missing = 0.0
        elif meta.kind == CATEGORICAL:
            values = np.array([c.strip() if c.strip() else None for c in cells], dtype=object)
            missing = float(np.mean([v is None for v in values]))
        else:
            values = np.array([_parse_float(c) for c in cells], dtype=float)
            missing = float(np.isnan(values).mean())
        items.append((replace(meta, missing_fraction=missing), values))

    ts = next(v for m, v in items if m.kind == TIMESTAMP)
    if group_column is not None:
        groups = next(v for m, v in items if m.name == group_column)
        keys = [(t, g or "") for t, g in zip(ts.astype("int64"), groups)]
    else:
        keys = [(t, "") for t in ts.astype("int64")]
    order = sorted(range(n), key=keys.__getitem__)
    seen, keep = set(), []
    for i in order:
        if keys[i] in seen:
            if on_duplicate == "error":
                raise DuplicateTimestamp(f"repeated timestamp {ts[i]}" + (f" for group {keys[i][1]!r}" if group_column else ""))
            continue
        seen.add(keys[i])
        keep.append(i)
    keep = np.asarray(keep)
    items = [(m, v[keep]) for m, v in items]
    return TimeSeriesTable(items, group_column=group_column)


def read_csv_columns(path) -> dict[str, list[str]]:
    path = Path(path)
    with path.open(newline="", encoding="utf-8-sig") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise EmptyFile(f"{path} is empty") from None
        header = [h.strip() for h in header]
        cols = {h: [] for h in header}
        for row in reader:
            if not row:
                continue
            row = row + [""] * (len(header) - len(row))
            for h, cell in zip(header, row):
                cols[h].append(cell)
    if not header or not cols[header[0]]:
        raise EmptyFile(f"{path} has no data rows")
    return cols


def load_csv_table(
    path,
    schema: Sequence[ColumnMeta],
    timestamp_format: str | None = None,
    group_column: str | None = None,
    on_duplicate: str = "error",
) -> TimeSeriesTable:
    """Load a comma-separated UTF-8 file with a header row into a table.

    Unparseable numeric cells become missing. File columns absent from
    ``schema`` are ignored; schema columns absent from the file raise
    ``MissingColumn``.
    """
    raw = read_csv_columns(path)
    parser = None
    if timestamp_format is not None:
        parser = lambda s: parse_timestamp(s, timestamp_format)  # noqa: E731
    return table_from_strings(raw, schema, parser, group_column=group_column, on_duplicate=on_duplicate)


# ---------------------------------------------------------------------------
# merging


def pivot_by_group(table: TimeSeriesTable, group_column: str) -> TimeSeriesTable:
    """Long-to-wide: one column per (variable, group), suffixed ``_<group>``.

    Only timestamps present for every group are kept.
    """
    groups = table.column(group_column)
    labels = sorted({g.strip() for g in groups if g is not None})
    ts = table.timestamps
    per_group_ts = [set(ts[groups == g].astype("int64")) for g in _raw_labels(groups, labels)]
    common = np.array(sorted(set.intersection(*per_group_ts)), dtype="int64").astype("datetime64[s]")
    if len(common) == 0:
        raise NoOverlap("groups share no timestamps")
    items = [(ColumnMeta(table.timestamp_name, TIMESTAMP), common)]
    value_cols = table.names_of_kind(CONTINUOUS, TARGET)
    for label, raw_label in zip(labels, _raw_labels(groups, labels)):
        mask = groups == raw_label
        sub_ts = ts[mask]
        idx = np.searchsorted(sub_ts, common)
        for name in value_cols:
            meta = table.meta(name)
            vals = table.column(name)[mask][idx]
            items.append((ColumnMeta(f"{name}_{label}", meta.kind, meta.missing_fraction, meta.unit), vals))
    return TimeSeriesTable(items)


def _raw_labels(groups, labels):
    # raw files may pad labels with whitespace (" Barcelona")
    raw = {}
    for g in groups:
        if g is not None:
            raw.setdefault(g.strip(), g)
    return [raw[label] for label in labels]


def merge_hourly(weather: TimeSeriesTable, generation: TimeSeriesTable, city_column: str | None = "city_name") -> TimeSeriesTable:
    """Inner-join weather and generation tables on timestamp.

    A long-format weather table (one row per city and hour) is first pivoted
    to ``<variable>_<City>`` columns.
    """
    if city_column is not None and city_column in weather:
        weather = pivot_by_group(weather, city_column)
    if weather.frequency != "hourly" or generation.frequency != "hourly":
        raise FrequencyMismatch("both tables must be hourly")
    tw = weather.timestamps.astype("int64")
    tg = generation.timestamps.astype("int64")
    common, iw, ig = np.intersect1d(tw, tg, assume_unique=True, return_indices=True)
    if len(common) == 0:
        raise NoOverlap("weather and generation tables share no timestamps")
    items = [(ColumnMeta(generation.timestamp_name, TIMESTAMP), common.astype("datetime64[s]"))]
    taken = {generation.timestamp_name}
    for meta, values in generation.items():
        if meta.kind == TIMESTAMP:
            continue
        items.append((meta, values[ig]))
        taken.add(meta.name)
    for meta, values in weather.items():
        if meta.kind == TIMESTAMP:
            continue
        name = meta.name if meta.name not in taken else f"{meta.name}_weather"
        items.append((replace(meta, name=name), values[iw]))
        taken.add(name)
    return TimeSeriesTable(items)


# ---------------------------------------------------------------------------
# imputation


@dataclass(frozen=True)
class ImputationStats:
    """Per-column long-gap fill values (mean for numeric, mode for categorical)."""

    fill: dict = field(default_factory=dict)

    def to_dict(self):
        return {k: (v if isinstance(v, str) else float(v)) for k, v in self.fill.items()}


def imputation_stats(table: TimeSeriesTable, train_rows=None) -> ImputationStats:
    rows = slice(None) if train_rows is None else train_rows
    fill = {}
    for meta, values in table.items():
        if meta.kind == TIMESTAMP:
            continue
        part = values[rows]
        if meta.kind == CATEGORICAL:
            observed = [v for v in part if v is not None]
            if not observed:
                raise AllMissingColumn(meta.name)
            counts = Counter(observed)
            best = max(counts.values())
            # ties resolve to the lexicographically smallest label
            fill[meta.name] = min(k for k, c in counts.items() if c == best)
        else:
            observed = part[~np.isnan(part)]
            if observed.size == 0:
                raise AllMissingColumn(meta.name)
            fill[meta.name] = float(observed.mean())
    return ImputationStats(fill)


def _missing_runs(mask: np.ndarray):
    """Yield (start, stop) of each run of True in ``mask``."""
    if not mask.any():
        return
    padded = np.concatenate([[False], mask, [False]])
    edges = np.flatnonzero(np.diff(padded.astype(np.int8)))
    for start, stop in zip(edges[::2], edges[1::2]):
        yield int(start), int(stop)


def _split_runs(runs, cut):
    for start, stop in runs:
        if cut is not None and start < cut < stop:
            yield start, cut
            yield cut, stop
        else:
            yield start, stop


def _impute_vector(values: np.ndarray, missing: np.ndarray, fill_value, cut=None):
    out = values.copy()
    for start, stop in _split_runs(_missing_runs(missing), cut):
        if start > 0 and stop - start <= MAX_FFILL_RUN:
            out[start:stop] = [out[start - 1]] * (stop - start) if out.dtype == object else out[start - 1]
        else:
            out[start:stop] = [fill_value] * (stop - start) if out.dtype == object else fill_value
    return out


def impute_gaps(table: TimeSeriesTable, stats: ImputationStats | None = None, train_rows=None, boundary: int | None = None) -> TimeSeriesTable:
    """Fill every missing cell.

    Runs of at most three consecutive missing values are forward-filled from
    the last observation; longer runs and leading gaps take the column mean
    (numeric) or mode (categorical) from ``stats``, which default to the
    statistics of ``train_rows`` (or of the whole table). With a group column
    the forward fill never crosses from one group to another. A run that
    straddles row ``boundary`` is treated as two runs, so rows before it are
    filled without looking at rows after it.
    """
    if stats is None:
        stats = imputation_stats(table, train_rows)
    groups = table.group_values()
    if groups is not None:
        group_index = [np.flatnonzero(groups == g) for g in dict.fromkeys(groups)]
    else:
        group_index = [np.arange(table.n_rows)]
    table_out = table
    for meta, values in table.items():
        if meta.kind == TIMESTAMP:
            continue
        missing = _is_missing(values, meta.kind)
        if not missing.any():
            continue
        if meta.name not in stats.fill:
            raise AllMissingColumn(meta.name)
        out = values.copy()
        for idx in group_index:
            cut = None if boundary is None else int(np.searchsorted(idx, boundary))
            out[idx] = _impute_vector(values[idx], missing[idx], stats.fill[meta.name], cut)
        table_out = table_out.replace_values(meta.name, out)
    return table_out


def drop_sparse_columns(table: TimeSeriesTable, threshold: float = 0.15):
    """Remove columns whose raw missing fraction is strictly above ``threshold``.

    Returns the reduced table and the names that were dropped.
    """
    dropped = [m.name for m in table.metas() if m.kind != TIMESTAMP and m.missing_fraction > threshold]
    remaining = [m for m in table.metas() if m.kind != TIMESTAMP and m.name not in dropped]
    if not remaining:
        raise AllColumnsDropped(f"every column exceeds the {threshold:.0%} missing threshold")
    return table.drop(dropped), dropped


# ---------------------------------------------------------------------------
# synthetic data


@dataclass(frozen=True)
class SyntheticSpec:
    """Recipe for a seeded synthetic hourly series.

    ``target = trend_slope * t + sum(a * sin(2 pi t / period)) + noise``.
    ``n_covariates`` extra columns carry phase-shifted copies of the seasonal
    signal plus independent noise.
    """

    n_rows: int = 5000
    seasonal_periods: tuple = ((24, 1.0),)
    trend_slope: float = 0.0
    noise_std: float = 0.05
    missing_rate: float = 0.0
    gap_max_len: int = 3
    seed: int = 0
    n_covariates: int = 0
    start: str = "2016-01-01T00:00:00"

    def validate(self):
        if self.n_rows < 2:
            raise InvalidSyntheticSpec("n_rows must be at least 2")
        if self.noise_std < 0:
            raise InvalidSyntheticSpec("noise_std must be nonnegative")
        if not 0.0 <= self.missing_rate < 1.0:
            raise InvalidSyntheticSpec("missing_rate must lie in [0, 1)")
        if self.gap_max_len < 1:
            raise InvalidSyntheticSpec("gap_max_len must be at least 1")
        for period, _ in self.seasonal_periods:
            if period <= 0:
                raise InvalidSyntheticSpec("seasonal periods must be positive")
        mean_run = (1 + self.gap_max_len) / 2
        if self.missing_rate / (1 - self.missing_rate) > mean_run:
            raise InvalidSyntheticSpec("missing_rate is unreachable with gaps no longer than gap_max_len")

    def to_dict(self):
        d = self.__dict__.copy()
        d["seasonal_periods"] = [list(p) for p in self.seasonal_periods]
        return d


def _inject_missing(n, rate, max_len, rng) -> np.ndarray:
    mask = np.zeros(n, dtype=bool)
    if rate == 0:
        return mask
    # each observed cell opens a gap with probability q; gaps are always
    # followed by an observation, so the long-run fraction is q*E[L]/(1+q*E[L])
    mean_run = (1 + max_len) / 2
    q = rate / ((1 - rate) * mean_run)
    starts = rng.random(n)
    lengths = rng.integers(1, max_len + 1, size=n)
    t = 0
    while t < n:
        if starts[t] < q:
            stop = min(n, t + lengths[t])
            mask[t:stop] = True
            t = stop + 1
        else:
            t += 1
    return mask


def generate_synthetic(spec: SyntheticSpec) -> TimeSeriesTable:
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    t = np.arange(spec.n_rows, dtype=float)
    seasonal = np.zeros(spec.n_rows)
    for period, amplitude in spec.seasonal_periods:
        seasonal += amplitude * np.sin(2 * np.pi * t / period)
    target = spec.trend_slope * t + seasonal
    if spec.noise_std > 0:
        target = target + rng.normal(0.0, spec.noise_std, spec.n_rows)
    start = np.datetime64(spec.start, "s")
    ts = start + np.arange(spec.n_rows) * HOUR
    columns = [("target", TARGET, target)]
    for j in range(spec.n_covariates):
        shift = rng.uniform(0, 6)
        cov = np.zeros(spec.n_rows)
        for period, amplitude in spec.seasonal_periods:
            cov += amplitude * np.sin(2 * np.pi * (t - shift) / period)
        cov += rng.normal(0.0, max(spec.noise_std, 1e-3) * 2, spec.n_rows)
        columns.append((f"x{j + 1}", CONTINUOUS, cov))
    items = [(ColumnMeta("timestamp", TIMESTAMP), ts)]
    for name, kind, values in columns:
        mask = _inject_missing(spec.n_rows, spec.missing_rate, spec.gap_max_len, rng)
        values = values.copy()
        values[mask] = np.nan
        items.append((ColumnMeta(name, kind, float(mask.mean())), values))
    return TimeSeriesTable(items, frequency="hourly")
