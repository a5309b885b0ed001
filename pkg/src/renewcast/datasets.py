"""Schemas and loaders for the two public renewable-energy datasets.

Dataset 1: hourly Spanish generation (``energy_dataset.csv``) plus hourly
weather for five cities (``weather_features.csv``). Dataset 2: photovoltaic
panel output at 12 northern-hemisphere sites (one CSV).
"""
from __future__ import annotations

from dataclasses import replace
from pathlib import Path

import numpy as np

from .errors import DatasetMissing, MissingColumn
from .ingest import (
    CATEGORICAL,
    CONTINUOUS,
    TARGET,
    TIMESTAMP,
    ColumnMeta,
    TimeSeriesTable,
    merge_hourly,
    parse_timestamp,
    read_csv_columns,
    table_from_strings,
)

CITIES = ("Barcelona", "Bilbao", "Madrid", "Seville", "Valencia")
WEATHER_VARIABLES = (
    "temp", "temp_min", "temp_max", "pressure", "humidity", "wind_speed",
    "wind_deg", "rain_1h", "rain_3h", "snow_3h", "clouds_all",
)
GENERATION_COLUMNS = ("generation_hydro", "generation_other_renewable", "generation_solar", "generation_wind")
DATASET1_TARGET = "renewable_total"

# raw energy_dataset.csv names feeding each aggregated generation column
_RAW_GENERATION = {
    "generation_hydro": ("generation hydro run-of-river and poundage", "generation hydro water reservoir"),
    "generation_other_renewable": ("generation other renewable",),
    "generation_solar": ("generation solar",),
    "generation_wind": ("generation wind onshore", "generation wind offshore"),
}

DATASET2_COLUMNS = (
    ("Location", CATEGORICAL, ""),
    ("Date", CONTINUOUS, "yyyymmdd"),
    ("Time", CONTINUOUS, "hhmm"),
    ("Latitude", CONTINUOUS, "deg"),
    ("Longitude", CONTINUOUS, "deg"),
    ("Altitude", CONTINUOUS, "ft"),
    ("YRMODAHRMI", TIMESTAMP, ""),
    ("Month", CONTINUOUS, ""),
    ("Hour", CONTINUOUS, "h"),
    ("Season", CATEGORICAL, ""),
    ("Humidity", CONTINUOUS, "%"),
    ("AmbientTemp", CONTINUOUS, "C"),
    ("PolyPwr", TARGET, "W"),
    ("Wind.Speed", CONTINUOUS, "km/h"),
    ("Visibility", CONTINUOUS, "km"),
    ("Pressure", CONTINUOUS, "mbar"),
    ("Cloud.Ceiling", CONTINUOUS, "km"),
)
DATASET2_TARGET = "PolyPwr"


def dataset2_schema():
    return [ColumnMeta(name, kind, unit=unit) for name, kind, unit in DATASET2_COLUMNS]


def weather_schema():
    return [ColumnMeta("dt_iso", TIMESTAMP), ColumnMeta("city_name", CATEGORICAL)] + [
        ColumnMeta(v, CONTINUOUS) for v in WEATHER_VARIABLES
    ]


def _require(path) -> Path:
    path = Path(path)
    if not path.is_file():
        raise DatasetMissing(f"dataset file not found: {path}")
    return path


def load_generation(path) -> TimeSeriesTable:
    """Load generation data, aggregating raw sub-sources to the four modelled columns.

    Accepts either the raw file (space-separated source names) or an already
    aggregated file with underscore names. ``renewable_total`` is the sum of
    the four aggregated columns and is the modelling target.
    """
    raw = read_csv_columns(_require(path))
    ts_name = "time" if "time" in raw else next(iter(raw))
    cols = {ts_name: raw[ts_name]}
    for name, sources in _RAW_GENERATION.items():
        if name in raw:
            cols[name] = raw[name]
            continue
        present = [s for s in sources if s in raw]
        if not present:
            raise MissingColumn(name)
        summed = []
        for cells in zip(*(raw[s] for s in present)):
            vals = [float(c) if c.strip() else np.nan for c in cells]
            summed.append("" if all(np.isnan(vals)) else repr(float(np.nansum(vals))))
        cols[name] = summed
    schema = [ColumnMeta(ts_name, TIMESTAMP)] + [ColumnMeta(n, CONTINUOUS, unit="MW") for n in GENERATION_COLUMNS]
    table = table_from_strings(cols, schema)
    total = np.sum([table.column(n) for n in GENERATION_COLUMNS], axis=0)
    return table.with_column(ColumnMeta(DATASET1_TARGET, TARGET, float(np.isnan(total).mean()), "MW"), total)


def load_weather(path) -> TimeSeriesTable:
    """Long-format weather file; the raw file repeats some (city, hour) rows, first kept."""
    raw = read_csv_columns(_require(path))
    present = [m for m in weather_schema() if m.name in raw]
    return table_from_strings(raw, present, group_column="city_name", on_duplicate="first")


def load_dataset1(generation_csv, weather_csv) -> TimeSeriesTable:
    return merge_hourly(load_weather(weather_csv), load_generation(generation_csv), city_column="city_name")


def _dataset2_timestamp(raw):
    stamps = raw["YRMODAHRMI"]
    out = []
    for i, cell in enumerate(stamps):
        digits = cell.strip().split(".")[0]
        if len(digits) == 12 and digits.isdigit():
            out.append(digits)
        else:
            date = raw["Date"][i].strip().split(".")[0]
            hhmm = raw["Time"][i].strip().split(".")[0].zfill(4)
            out.append(date + hhmm)
    return out


def load_dataset2(path) -> TimeSeriesTable:
    """Load the multi-site PV table; rows are ordered by timestamp then location."""
    raw = read_csv_columns(_require(path))
    for name, _, _ in DATASET2_COLUMNS:
        if name not in raw:
            raise MissingColumn(name)
    raw = dict(raw)
    raw["YRMODAHRMI"] = _dataset2_timestamp(raw)
    return table_from_strings(
        raw,
        dataset2_schema(),
        timestamp_parser=lambda s: parse_timestamp(s, "%Y%m%d%H%M"),
        group_column="Location",
        on_duplicate="first",
    )


def season_dummies_from_label(table: TimeSeriesTable, column="Season") -> TimeSeriesTable:
    """Replace a season label column by Season_Spring/Summer/Winter flags (autumn/fall is the reference)."""
    labels = [None if v is None else v.strip().lower() for v in table.column(column)]
    out = table.drop([column])
    for season in ("Spring", "Summer", "Winter"):
        flag = np.array([1.0 if lab == season.lower() else 0.0 for lab in labels])
        out = out.with_column(ColumnMeta(f"Season_{season}", CONTINUOUS), flag)
    return out


def mark_target(table: TimeSeriesTable, name: str) -> TimeSeriesTable:
    meta = table.meta(name)
    return table.with_column(replace(meta, kind=TARGET), table.column(name))
