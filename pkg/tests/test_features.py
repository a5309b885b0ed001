import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from renewcast.errors import EmptyTrainRange, StillNonStationary, UnfittedColumn, ZeroVarianceTarget
from renewcast.features import (
    PipelineOptions,
    _keep_cyclic_pairs,
    add_cyclical_calendar,
    apply_loo,
    apply_plan,
    chronological_split,
    correlation_filter,
    difference,
    fit_loo,
    fit_minmax,
    fit_plan,
    loo_encode,
    pearson,
    scale,
    stationarize,
    undifference,
)
from renewcast.ingest import CATEGORICAL, CONTINUOUS, TARGET, TIMESTAMP, ColumnMeta, SyntheticSpec, TimeSeriesTable, generate_synthetic
from renewcast.stats import stationarity_report

HOUR = np.timedelta64(3600, "s")


def _with_category(table, seed=0):
    labels = np.random.default_rng(seed).choice(["n", "e", "s", "w"], size=table.n_rows).astype(object)
    return table.with_column(ColumnMeta("site", CATEGORICAL), labels)


def _perturb_validation(table, start, seed):
    """Replace every observed value at rows >= start; missingness is left as it was."""
    r = np.random.default_rng(seed)
    out = table
    for meta, values in table.items():
        if meta.kind == TIMESTAMP:
            continue
        v = values.copy()
        if meta.kind == CATEGORICAL:
            obs = np.array([x is not None for x in v])
            obs[:start] = False
            v[obs] = r.choice(["n", "e", "s", "w", "new"], size=int(obs.sum()))
        else:
            obs = ~np.isnan(v)
            obs[:start] = False
            v[obs] = r.normal(0, 50, int(obs.sum()))
        out = out.replace_values(meta.name, v)
    return out


class TestSplit:
    @settings(max_examples=100)
    @given(n=st.integers(2, 10_000), ratio=st.floats(0.01, 0.99))
    def test_partition(self, n, ratio):
        (a, b), (c, d) = chronological_split(n, ratio)
        assert a == 0 and b == c and d == n
        assert d - c == round(ratio * n)

    def test_rejects_bad_ratio(self):
        with pytest.raises(ValueError):
            chronological_split(10, 1.0)


class TestScaling:
    def test_round_trip_and_range(self, synthetic_table):
        t = synthetic_table
        params = fit_minmax(t, (0, 400), ["x1"])
        x = t.column("x1")
        z = scale(x, params, column="x1")
        train = z[:400][~np.isnan(z[:400])]
        assert train.min() == 0.0 and train.max() == 1.0
        assert_allclose(scale(z, params, "inverse", "x1"), x, equal_nan=True)

    def test_constant_column(self):
        ts = np.datetime64("2020-01-01T00") + np.arange(3) * HOUR
        t = TimeSeriesTable([(ColumnMeta("t", TIMESTAMP), ts), (ColumnMeta("c", CONTINUOUS), [2.0, 2.0, 2.0])])
        p = fit_minmax(t, (0, 3))
        assert_allclose(scale([2.0, 5.0], p), [0.0, 0.0])
        assert_allclose(scale([0.0], p, "inverse"), [2.0])

    def test_unknown_column(self, synthetic_table):
        with pytest.raises(UnfittedColumn):
            scale([1.0], fit_minmax(synthetic_table, (0, 10), ["x1"]), column="x2")

    def test_empty_range(self, synthetic_table):
        with pytest.raises(EmptyTrainRange):
            fit_minmax(synthetic_table, np.array([], dtype=int))


class TestLeaveOneOut:
    def test_hand_computed(self):
        cats = np.array(["a", "a", "a", "b", "a", "c"], dtype=object)
        y = np.array([1.0, 2.0, 6.0, 4.0, 100.0, 100.0])
        train = np.arange(4)
        enc = fit_loo(cats, y, train)
        out = apply_loo(enc, cats, y, train)
        assert_allclose(out[:3], [4.0, 3.5, 1.5])  # others in the category, self excluded
        assert out[3] == 4.0  # singleton keeps the category mean
        assert out[4] == 3.0  # validation row uses the full training mean of "a"
        assert out[5] == np.mean(y[:4])  # unseen category -> global training mean

    def test_validation_target_never_used(self):
        cats = np.array(["a", "a", "b", "a"], dtype=object)
        y = np.array([1.0, 2.0, 3.0, 4.0])
        a = loo_encode_values(cats, y)
        y[3] = -1000.0
        assert_allclose(loo_encode_values(cats, y), a)


def loo_encode_values(cats, y):
    ts = np.datetime64("2020-01-01T00") + np.arange(len(y)) * HOUR
    t = TimeSeriesTable([(ColumnMeta("t", TIMESTAMP), ts), (ColumnMeta("c", CATEGORICAL), cats), (ColumnMeta("y", TARGET), y)])
    return loo_encode(t, "c", "y", (0, 3))[0]


class TestCalendar:
    def test_known_values(self):
        ts = np.array(["2021-01-04T00:00:00", "2021-07-03T06:00:00"], dtype="datetime64[s]")
        t = add_cyclical_calendar(TimeSeriesTable([(ColumnMeta("t", TIMESTAMP), ts)], frequency="irregular"))
        assert_allclose(t["sine_hr"], [0.0, 1.0], atol=1e-12)
        assert_allclose(t["cos_hr"], [1.0, 0.0], atol=1e-12)
        assert_allclose(t["is_weekend"], [0.0, 1.0])  # Monday, Saturday
        assert_allclose(t["Season_Summer"], [0.0, 1.0])
        assert_allclose(t["Season_Winter"], [1.0, 0.0])

    def test_unit_circle(self, synthetic_table):
        t = add_cyclical_calendar(synthetic_table)
        assert_allclose(t["sine_hr"] ** 2 + t["cos_hr"] ** 2, 1.0)
        assert_allclose(t["sine_mon"] ** 2 + t["cos_mon"] ** 2, 1.0)


class TestStationarize:
    @settings(max_examples=50)
    @given(st.lists(st.floats(-1e3, 1e3), min_size=3, max_size=30), st.integers(0, 2))
    def test_difference_round_trip(self, xs, order):
        d, heads = difference(xs, order)
        assert_allclose(undifference(d, heads), xs, atol=1e-6)

    def test_random_walk_needs_one_difference(self):
        x = np.cumsum(np.random.default_rng(1).standard_normal(600))
        out, order = stationarize(x, stationarity_report(x))
        assert order == 1 and out.size == 599

    def test_stationary_untouched(self, rng):
        x = rng.standard_normal(300)
        assert stationarize(x, stationarity_report(x))[1] == 0

    def test_gives_up(self, rng):
        x = rng.standard_normal(300)
        rep = stationarity_report(np.cumsum(x))
        with pytest.raises(StillNonStationary):
            stationarize(x, rep, tester=lambda s: "non_stationary")


class TestCorrelation:
    def test_pearson_against_numpy(self, rng):
        x, y = rng.standard_normal(100), rng.standard_normal(100)
        assert_allclose(pearson(x, y), np.corrcoef(x, y)[0, 1])

    def test_filter_drops_weak_features(self, synthetic_table):
        from renewcast.ingest import impute_gaps

        t = impute_gaps(synthetic_table)
        noise = np.random.default_rng(0).standard_normal(t.n_rows)
        t = t.with_column(ColumnMeta("noise", CONTINUOUS), noise)
        out, dropped = correlation_filter(t, "target", 0.1, (0, 400))
        assert dropped == ["noise"]

    def test_constant_target(self):
        ts = np.datetime64("2020-01-01T00") + np.arange(3) * HOUR
        t = TimeSeriesTable([(ColumnMeta("t", TIMESTAMP), ts), (ColumnMeta("y", TARGET), [1.0, 1.0, 1.0]), (ColumnMeta("x", CONTINUOUS), [1.0, 2.0, 3.0])])
        with pytest.raises(ZeroVarianceTarget):
            correlation_filter(t, "y")

    def test_cyclic_pairs_kept_together(self):
        feats = ["sine_hr", "cos_hr", "sine_mon", "cos_mon", "x"]
        assert _keep_cyclic_pairs(["cos_hr", "x"], feats) == ["x"]
        assert _keep_cyclic_pairs(["sine_mon", "cos_mon"], feats) == ["sine_mon", "cos_mon"]


class TestPlan:
    def test_design_shapes(self, synthetic_table):
        plan = fit_plan(synthetic_table, "target", (0, 480))
        d = apply_plan(plan, synthetic_table)
        assert d.X.shape[0] == d.y.size == synthetic_table.n_rows
        assert d.X.shape[1] == len(d.feature_names)
        assert d.feature_names[-1] == "target_history"
        assert not np.isnan(d.X).any()
        assert d.y[:480].min() == 0.0 and d.y[:480].max() == 1.0

    def test_plan_is_frozen(self, synthetic_table):
        plan = fit_plan(synthetic_table, "target", (0, 480))
        with pytest.raises(RuntimeError):
            plan.append("x", {})

    def test_options_disable_steps(self, synthetic_table):
        opts = PipelineOptions(calendar=False, stationarize=False, correlation_filter=False, pca=False)
        plan = fit_plan(synthetic_table, "target", (0, 480), opts)
        kinds = [k for k, _ in plan.records]
        assert kinds == ["impute", "scaling", "features"]
        assert plan.feature_names == ["x1", "x2", "x3"]

    def test_replay_is_deterministic(self, synthetic_table):
        plan = fit_plan(synthetic_table, "target", (0, 480))
        a, b = apply_plan(plan, synthetic_table), apply_plan(plan, synthetic_table)
        assert np.array_equal(a.X, b.X)
        assert plan.to_dict() == fit_plan(synthetic_table, "target", (0, 480)).to_dict()


class TestLeakage:
    """Fitted transforms must not move when only validation rows change."""

    @settings(max_examples=25)
    @given(seed=st.integers(0, 10_000), ratio=st.sampled_from([0.2, 0.3, 0.4, 0.5]))
    def test_plan_ignores_validation_rows(self, seed, ratio):
        table = _with_category(generate_synthetic(SyntheticSpec(n_rows=400, trend_slope=1e-3, noise_std=0.1, missing_rate=0.05, n_covariates=3, seed=seed)), seed)
        train, _ = chronological_split(table.n_rows, ratio)
        plan = fit_plan(table, "target", train)
        moved = _perturb_validation(table, train[1], seed + 1)
        again = fit_plan(moved, "target", train)
        for kind in ("impute", "loo", "stationarity", "scaling", "correlation", "features", "pca"):
            a, b = plan.get(kind), again.get(kind)
            if kind == "loo":
                a = {k: v.to_dict() for k, v in a.items()}
                b = {k: v.to_dict() for k, v in b.items()}
            elif kind == "correlation":
                assert a["dropped"] == b["dropped"]
                assert np.array_equal(a["matrix"], b["matrix"])
                continue
            elif hasattr(a, "to_dict"):
                a, b = a.to_dict(), b.to_dict()
            assert a == b, kind

    def test_training_design_rows_unchanged(self, synthetic_table):
        plan = fit_plan(synthetic_table, "target", (0, 480))
        a = apply_plan(plan, synthetic_table)
        b = apply_plan(plan, _perturb_validation(synthetic_table, 480, 1))
        assert np.array_equal(a.X[:480], b.X[:480])
        assert np.array_equal(a.y[:480], b.y[:480])
