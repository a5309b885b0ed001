import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from renewcast.datasets import DATASET1_TARGET, load_dataset1, load_dataset2, load_generation
from renewcast.errors import (
    AllColumnsDropped,
    DatasetMissing,
    DuplicateTimestamp,
    EmptyFile,
    InvalidSyntheticSpec,
    MissingColumn,
    NoOverlap,
)
from renewcast.ingest import (
    CATEGORICAL,
    CONTINUOUS,
    TARGET,
    TIMESTAMP,
    ColumnMeta,
    SyntheticSpec,
    TimeSeriesTable,
    drop_sparse_columns,
    generate_synthetic,
    impute_gaps,
    load_csv_table,
    merge_hourly,
)

HOUR = np.timedelta64(3600, "s")


def _table(values, kind=CONTINUOUS, groups=None):
    n = len(values)
    ts = np.datetime64("2020-01-01T00:00:00") + np.arange(n) * HOUR
    items = [(ColumnMeta("t", TIMESTAMP), ts), (ColumnMeta("x", kind), values)]
    if groups is not None:
        items.append((ColumnMeta("g", CATEGORICAL), groups))
        items[0] = (ColumnMeta("t", TIMESTAMP), np.datetime64("2020-01-01T00:00:00") + np.arange(n) // 2 * HOUR)
    return TimeSeriesTable(items, group_column="g" if groups is not None else None)


def _write(path, text):
    path.write_text(text)
    return path


class TestTable:
    def test_columns_are_read_only(self):
        t = _table([1.0, 2.0])
        with pytest.raises(ValueError):
            t.column("x")[0] = 5.0

    def test_needs_sorted_timestamps(self):
        ts = np.array(["2020-01-01T01", "2020-01-01T00"], dtype="datetime64[s]")
        with pytest.raises(ValueError):
            TimeSeriesTable([(ColumnMeta("t", TIMESTAMP), ts)])

    def test_frequency_inference(self):
        assert _table([1.0, 2.0, 3.0]).frequency == "hourly"

    def test_take_keeps_metadata(self):
        t = _table([1.0, 2.0, 3.0]).take(slice(0, 2))
        assert t.n_rows == 2 and t.meta("x").kind == CONTINUOUS


class TestCsv:
    SCHEMA = [ColumnMeta("time", TIMESTAMP), ColumnMeta("a", CONTINUOUS), ColumnMeta("y", TARGET)]

    def test_parse_and_sort(self, tmp_path):
        p = _write(tmp_path / "d.csv", "time,a,y,extra\n2020-01-01 01:00:00,2,x,9\n2020-01-01 00:00:00,,1,9\n")
        t = load_csv_table(p, self.SCHEMA)
        assert_allclose(t.column("a"), [np.nan, 2.0])
        assert np.isnan(t.column("y")[1])  # unparseable cell becomes missing
        assert t.meta("a").missing_fraction == 0.5
        assert "extra" not in t

    def test_missing_column(self, tmp_path):
        p = _write(tmp_path / "d.csv", "time,a\n2020-01-01 00:00:00,1\n")
        with pytest.raises(MissingColumn):
            load_csv_table(p, self.SCHEMA)

    def test_empty_file(self, tmp_path):
        p = _write(tmp_path / "d.csv", "time,a,y\n")
        with pytest.raises(EmptyFile):
            load_csv_table(p, self.SCHEMA)

    def test_duplicate_timestamp(self, tmp_path):
        p = _write(tmp_path / "d.csv", "time,a,y\n2020-01-01 00:00:00,1,1\n2020-01-01 00:00:00,2,2\n")
        with pytest.raises(DuplicateTimestamp):
            load_csv_table(p, self.SCHEMA)
        assert load_csv_table(p, self.SCHEMA, on_duplicate="first").column("a")[0] == 1.0

    def test_timezone_offsets_are_normalized(self, tmp_path):
        p = _write(tmp_path / "d.csv", "time,a,y\n2020-01-01 00:00:00+01:00,1,1\n2020-01-01 00:00:00+00:00,2,2\n")
        t = load_csv_table(p, self.SCHEMA)
        assert_allclose(t.column("a"), [1.0, 2.0])


class TestDatasets:
    def test_generation_aggregates_sources(self, tmp_path):
        p = _write(
            tmp_path / "energy.csv",
            "time,generation hydro run-of-river and poundage,generation hydro water reservoir,generation other renewable,"
            "generation solar,generation wind onshore,generation wind offshore\n"
            "2015-01-01 00:00:00+01:00,1,2,3,4,5,\n",
        )
        t = load_generation(p)
        assert t.column("generation_hydro")[0] == 3.0
        assert t.column("generation_wind")[0] == 5.0
        assert t.column(DATASET1_TARGET)[0] == 15.0

    def test_dataset1_merge(self, tmp_path):
        gen = _write(tmp_path / "g.csv", "time,generation_hydro,generation_other_renewable,generation_solar,generation_wind\n"
                     "2015-01-01 00:00:00,1,1,1,1\n2015-01-01 01:00:00,2,2,2,2\n")
        w = _write(tmp_path / "w.csv", "dt_iso,city_name,temp\n"
                   "2015-01-01 00:00:00,Madrid,280\n2015-01-01 00:00:00, Bilbao,270\n"
                   "2015-01-01 01:00:00,Madrid,281\n2015-01-01 01:00:00,Madrid,999\n2015-01-01 01:00:00, Bilbao,271\n")
        t = load_dataset1(gen, w)
        assert t.n_rows == 2
        assert_allclose(t.column("temp_Madrid"), [280, 281])
        assert_allclose(t.column("temp_Bilbao"), [270, 271])

    def test_dataset2_grouped(self, tmp_path):
        header = "Location,Date,Time,Latitude,Longitude,Altitude,YRMODAHRMI,Month,Hour,Season,Humidity,AmbientTemp,PolyPwr,Wind.Speed,Visibility,Pressure,Cloud.Ceiling"
        rows = ["B,20170523,1100,1,1,1,201705231100,5,11,Spring,50,20,10,5,10,1000,72",
                "A,20170523,1100,1,1,1,201705231100,5,11,Spring,50,20,12,5,10,1000,72",
                "A,20170523,1200,1,1,1,,5,12,Spring,50,20,13,5,10,1000,72"]
        t = load_dataset2(_write(tmp_path / "pv.csv", "\n".join([header, *rows]) + "\n"))
        assert t.group_column == "Location"
        assert list(t.column("Location")) == ["A", "B", "A"]
        assert t.timestamps[2] == np.datetime64("2017-05-23T12:00:00")

    def test_missing_file(self, tmp_path):
        with pytest.raises(DatasetMissing):
            load_generation(tmp_path / "absent.csv")

    def test_no_overlap(self):
        a = _table([1.0, 2.0])
        ts = np.datetime64("2021-01-01T00:00:00") + np.arange(2) * HOUR
        b = TimeSeriesTable([(ColumnMeta("t", TIMESTAMP), ts), (ColumnMeta("y", TARGET), [1.0, 2.0])])
        with pytest.raises(NoOverlap):
            merge_hourly(a, b, city_column=None)


class TestImputation:
    def test_short_gap_forward_filled(self):
        t = impute_gaps(_table([1.0, np.nan, np.nan, np.nan, 5.0]))
        assert_allclose(t.column("x"), [1, 1, 1, 1, 5])

    def test_long_gap_takes_mean(self):
        t = impute_gaps(_table([1.0, np.nan, np.nan, np.nan, np.nan, 5.0]))
        assert_allclose(t.column("x"), [1, 3, 3, 3, 3, 5])

    def test_leading_gap_takes_mean(self):
        assert_allclose(impute_gaps(_table([np.nan, 2.0, 4.0])).column("x"), [3, 2, 4])

    def test_fill_statistics_from_train_rows_only(self):
        t = impute_gaps(_table([1.0, 3.0, np.nan, np.nan, np.nan, np.nan, 100.0]), train_rows=slice(0, 2))
        assert_allclose(t.column("x")[2:6], 2.0)

    def test_categorical_mode(self):
        t = impute_gaps(_table(["a", "b", "b", None, None, None, None], kind=CATEGORICAL))
        assert list(t.column("x")[3:]) == ["b"] * 4

    def test_forward_fill_stays_inside_group(self):
        t = impute_gaps(_table([1.0, 7.0, np.nan, 9.0], groups=["a", "b", "a", "b"]))
        assert t.column("x")[2] == 1.0

    def test_boundary_splits_runs(self):
        # 2 missing before the boundary and 2 after: each half is short
        vals = [1.0, 2.0, np.nan, np.nan, np.nan, np.nan, 3.0]
        assert_allclose(impute_gaps(_table(vals))[ "x"][2:6], 2.0)  # one long run -> mean of 1,2,3
        assert_allclose(impute_gaps(_table(vals), boundary=4)["x"][2:6], 2.0)
        vals = [5.0, 1.0, np.nan, np.nan, np.nan, np.nan, 3.0]
        assert_allclose(impute_gaps(_table(vals), boundary=4)["x"][2:4], 1.0)
        assert_allclose(impute_gaps(_table(vals))["x"][2:4], 3.0)

    @settings(max_examples=50)
    @given(st.lists(st.one_of(st.none(), st.floats(-10, 10)), min_size=2, max_size=40).filter(lambda v: any(x is not None for x in v)))
    def test_no_missing_left_and_observed_untouched(self, vals):
        x = np.array([np.nan if v is None else v for v in vals])
        out = impute_gaps(_table(x)).column("x")
        assert not np.isnan(out).any()
        obs = ~np.isnan(x)
        assert np.array_equal(out[obs], x[obs])


class TestSparse:
    def test_strictly_above_threshold(self):
        ts = np.datetime64("2020-01-01T00") + np.arange(4) * HOUR
        t = TimeSeriesTable([
            (ColumnMeta("t", TIMESTAMP), ts),
            (ColumnMeta("a", CONTINUOUS, 0.15), [1, 2, 3, 4]),
            (ColumnMeta("b", CONTINUOUS, 0.5), [1, 2, 3, 4]),
        ])
        out, dropped = drop_sparse_columns(t, 0.15)
        assert dropped == ["b"] and "a" in out

    def test_all_dropped(self):
        t = TimeSeriesTable([(ColumnMeta("t", TIMESTAMP), [np.datetime64("2020-01-01")]), (ColumnMeta("a", CONTINUOUS, 0.9), [1.0])])
        with pytest.raises(AllColumnsDropped):
            drop_sparse_columns(t)


class TestSynthetic:
    def test_deterministic(self):
        spec = SyntheticSpec(n_rows=300, missing_rate=0.05, n_covariates=2, seed=9)
        assert generate_synthetic(spec).equals(generate_synthetic(spec))

    def test_pure_signal(self):
        t = generate_synthetic(SyntheticSpec(n_rows=48, noise_std=0.0, trend_slope=0.5))
        tt = np.arange(48)
        assert_allclose(t.column("target"), 0.5 * tt + np.sin(2 * np.pi * tt / 24), atol=1e-12)

    @settings(max_examples=10)
    @given(rate=st.floats(0.0, 0.3), seed=st.integers(0, 1000))
    def test_missing_rate_and_gap_length(self, rate, seed):
        t = generate_synthetic(SyntheticSpec(n_rows=20000, missing_rate=rate, gap_max_len=3, seed=seed))
        x = t.column("target")
        assert abs(np.isnan(x).mean() - rate) < 0.02
        runs = np.diff(np.flatnonzero(np.diff(np.r_[0, np.isnan(x).astype(int), 0])))[::2]
        assert runs.size == 0 or runs.max() <= 3

    @pytest.mark.parametrize("kw", [{"n_rows": 1}, {"noise_std": -1.0}, {"missing_rate": 1.0}, {"seasonal_periods": ((0, 1.0),)}])
    def test_invalid(self, kw):
        with pytest.raises(InvalidSyntheticSpec):
            generate_synthetic(SyntheticSpec(**kw))
