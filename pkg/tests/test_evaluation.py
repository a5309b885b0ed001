import csv
import io
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from renewcast.errors import LengthMismatch, SplitTooSmall, TooFewFolds
from renewcast.evaluation import (
    METRICS,
    EvalSettings,
    MetricSet,
    crossval_ci,
    emit_report,
    fmt,
    fold_prefixes,
    fold_seed,
    friedman_table,
    metric_matrix,
    metrics_csv_text,
    prepare_split,
    ratio_sweep,
    regression_metrics,
    report_from_summary,
    report_summary,
    split_rows,
)
from renewcast.features import PipelineOptions
from renewcast.ingest import CATEGORICAL, CONTINUOUS, TARGET, TIMESTAMP, ColumnMeta, TimeSeriesTable
from renewcast.models import default_spec

FAST = EvalSettings(lookback=6, max_epochs=2, patience=2)


def tiny(family, regularized=False):
    base = default_spec(family, regularized)
    if family == "arima":
        return replace(base, arima_order=(1, 1, 0))
    return replace(base, layer_widths=(8, 4), activations=base.activations[:2], split=1 if base.split else 0, batch_size=64)


def _grouped_table(n_hours=150):
    ts = np.repeat(np.datetime64("2020-01-01T00") + np.arange(n_hours) * np.timedelta64(1, "h"), 2)
    sites = np.tile(np.array(["a", "b"], dtype=object), n_hours)
    r = np.random.default_rng(0)
    t = np.arange(2 * n_hours) // 2
    y = np.sin(2 * np.pi * t / 24) + np.where(sites == "a", 0.0, 0.5) + 0.05 * r.standard_normal(2 * n_hours)
    return TimeSeriesTable(
        [(ColumnMeta("t", TIMESTAMP), ts), (ColumnMeta("site", CATEGORICAL), sites), (ColumnMeta("x", CONTINUOUS), y + r.normal(0, 0.1, y.size)), (ColumnMeta("y", TARGET), y)],
        group_column="site",
    )


class TestMetrics:
    def test_hand_computed(self):
        rmse, mae, r2, degenerate = regression_metrics([1.0, 2.0, 3.0], [1.0, 2.0, 5.0])
        assert_allclose(rmse, np.sqrt(4 / 3))
        assert_allclose(mae, 2 / 3)
        assert_allclose(r2, 1 - 4 / 2)
        assert not degenerate

    def test_constant_target_flags_r2(self):
        _, _, r2, degenerate = regression_metrics([2.0, 2.0], [1.0, 3.0])
        assert r2 == 0.0 and degenerate

    def test_length_mismatch(self):
        with pytest.raises(LengthMismatch):
            regression_metrics([1.0], [1.0, 2.0])

    @settings(max_examples=100)
    @given(seed=st.integers(0, 2**31 - 1), n=st.integers(2, 200))
    def test_rmse_squared_is_mse(self, seed, n):
        r = np.random.default_rng(seed)
        t, p = r.standard_normal(n), r.standard_normal(n)
        assert abs(regression_metrics(t, p)[0] ** 2 - np.mean((t - p) ** 2)) <= 1e-10

    def test_crossval_ci(self):
        folds = [MetricSet(*([float(v)] * 8)) for v in (1, 2, 3, 4, 5)]
        ci = crossval_ci(folds)
        assert set(ci) == set(METRICS)
        assert_allclose(ci["val_rmse"].half_width, 1.96 * np.sqrt(2.5) / np.sqrt(5))
        with pytest.raises(TooFewFolds):
            crossval_ci(folds[:1])

    @pytest.mark.parametrize("value, text", [(0.0388123456, "0.0388123"), (1234567.0, "1.23457e+06"), (2.0, "2"), (float("nan"), "")])
    def test_six_significant_digits(self, value, text):
        assert fmt(value) == text


class TestSplits:
    @settings(max_examples=100)
    @given(n=st.integers(10, 100_000), k=st.integers(1, 10))
    def test_fold_prefixes_grow_to_full(self, n, k):
        m = fold_prefixes(n, k)
        assert m[-1] == n and all(a <= b for a, b in zip(m, m[1:]))
        assert m[0] >= n // 2

    def test_prefixes_respect_timestamps(self):
        t = _grouped_table()
        for m in fold_prefixes(t.n_rows, 3, t.timestamps):
            assert m == t.n_rows or t.timestamps[m] != t.timestamps[m - 1]

    def test_grouped_split_never_straddles_a_timestamp(self):
        t = _grouped_table(151)
        (_, b), (c, _) = split_rows(t, 0.3)
        assert b == c and t.timestamps[b - 1] < t.timestamps[b]

    def test_fold_seed_distinct_and_stable(self):
        seeds = {fold_seed(7, r, f) for r in range(4) for f in range(5)}
        assert len(seeds) == 20
        assert fold_seed(7, 1, 2) == fold_seed(7, 1, 2)

    @pytest.mark.parametrize("ratio", [0.2, 0.3, 0.4, 0.5])
    def test_prepared_split_is_causal(self, synthetic_table, ratio):
        prep = prepare_split(synthetic_table, "target", ratio, FAST)
        assert prep.train_max_timestamp < prep.val_min_timestamp
        assert prep.rows_train.max() < prep.val_range[0] <= prep.rows_val.min() - FAST.lookback
        assert prep.plan.fit_row_range == prep.train_range

    def test_grouped_windows_stay_within_site(self):
        t = _grouped_table()
        prep = prepare_split(t, "y", 0.3, FAST)
        groups = prep.groups
        assert set(groups[prep.rows_val]) == {"a", "b"}
        assert prep.X_val.shape[0] == prep.rows_val.size

    def test_split_too_small(self, synthetic_table):
        with pytest.raises(SplitTooSmall):
            prepare_split(synthetic_table.take(slice(0, 20)), "target", 0.2, FAST)


@pytest.fixture(scope="module")
def sweep(synthetic_table):
    specs = [tiny("dnn"), tiny("dnn", True), tiny("arima")]
    return ratio_sweep(specs, synthetic_table, "target", [0.2, 0.3], k=2, seed=3, settings=FAST)


class TestSweep:
    def test_cells_complete(self, sweep):
        assert sweep.n_failed == 0
        assert [c.k for c in sweep.ordered_cells()] == [2] * 6
        assert set(sweep.seeds) == {"0.2/1", "0.2/2", "0.3/1", "0.3/2"}

    def test_metrics_csv_layout(self, sweep):
        rows = list(csv.reader(io.StringIO(metrics_csv_text(sweep))))
        assert rows[0][:6] == ["model", "ratio", "train_rmse", "train_rmse_ci", "val_rmse", "val_rmse_ci"]
        assert [r[0] for r in rows[1:]] == ["DNN", "DNN", "Reg. DNN", "Reg. DNN", "ARIMA", "ARIMA"]

    def test_no_ci_columns_for_single_fold(self, synthetic_table):
        rep = ratio_sweep([tiny("dnn")], synthetic_table, "target", [0.2], k=1, seed=0, settings=FAST)
        header = metrics_csv_text(rep).splitlines()[0]
        assert "_ci" not in header

    def test_friedman_uses_printed_means(self, sweep):
        labels, M = metric_matrix(sweep, "val_rmse")
        assert M.shape == (2, 3)
        for j, lab in enumerate(labels):
            assert M[0, j] == float(fmt(sweep.cell(lab, 0.2).mean("val_rmse")))
        res = friedman_table(sweep)
        assert set(res) == set(METRICS) and res["val_rmse"].df == 2

    def test_deterministic(self, synthetic_table, sweep):
        again = ratio_sweep([tiny("dnn"), tiny("dnn", True), tiny("arima")], synthetic_table, "target", [0.2, 0.3], k=2, seed=3, settings=FAST)
        assert metrics_csv_text(again) == metrics_csv_text(sweep)

    def test_failed_cell_does_not_stop_sweep(self, synthetic_table):
        bad = replace(tiny("cnn"), layer_widths=(4, 4, 4), activations=("relu",) * 3, split=2, conv_width=5)
        rep = ratio_sweep([bad, tiny("dnn")], synthetic_table, "target", [0.2], k=1, seed=0, settings=FAST)
        assert rep.cell("CNN", 0.2).status == "failed"
        assert "InvalidSpec" in rep.cell("CNN", 0.2).error
        assert rep.cell("DNN", 0.2).status == "ok"
        assert friedman_table(rep) == {}

    def test_duplicate_labels_rejected(self, synthetic_table):
        with pytest.raises(ValueError):
            ratio_sweep([tiny("dnn"), tiny("dnn")], synthetic_table, "target", [0.2], k=1)

    def test_emit_and_reemit_identical(self, sweep, tmp_path):
        files = emit_report(sweep, tmp_path / "a")
        assert {"metrics", "folds", "friedman", "params"} <= set(files)
        assert any(k.startswith("plot:") for k in files)
        rebuilt = report_from_summary(report_summary(sweep))
        emit_report(rebuilt, tmp_path / "b", plots=False)
        for name in ("metrics.csv", "folds.csv", "friedman.csv", "params.csv"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

    def test_plots_are_reproducible(self, sweep, tmp_path):
        emit_report(sweep, tmp_path / "a")
        emit_report(sweep, tmp_path / "b")
        svg = sorted(p.name for p in (tmp_path / "a" / "plots").glob("*.svg"))
        assert svg and all((tmp_path / "a" / "plots" / s).read_bytes() == (tmp_path / "b" / "plots" / s).read_bytes() for s in svg)

    def test_params_csv_lists_published_ranges(self, sweep):
        from renewcast.evaluation import params_csv_text

        rows = list(csv.reader(io.StringIO(params_csv_text(sweep))))
        assert rows[0] == ["model", "family", "parameter_count", "published_range"]
        assert rows[1][3] == "300K-450K"

    def test_grouped_sweep_with_arima(self):
        rep = ratio_sweep([tiny("arima"), tiny("lstm")], _grouped_table(), "y", [0.3], k=1, seed=1,
                          settings=replace(FAST, options=PipelineOptions(pca=False)))
        assert rep.n_failed == 0
