from dataclasses import replace

import numpy as np
import pytest
from gradcheck import numeric_grad
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from renewcast.errors import InvalidOrders, InvalidSpec, TooShort
from renewcast.models import (
    FAMILIES,
    NEURAL_FAMILIES,
    PUBLISHED_PARAM_RANGES,
    ModelSpec,
    build_model,
    closed_form_parameter_count,
    count_parameters,
    default_spec,
    make_windows,
    partition_windows,
)
from renewcast.models.arima import (
    _css_and_grad,
    _lagged,
    _make_invertible,
    arima_fit_forecast,
    css_residuals,
    fit_arima,
    one_step_predictions,
    select_orders,
)

# frozen from the tensor walk at lookback 24 and 13 input features
EXPECTED_COUNTS = {
    "lstm": 65441,
    "stacked_lstm": 266145,
    "cnn": 191233,
    "cnn_lstm": 109761,
    "dnn": 46849,
    "time_distributed_mlp": 12161,
    "encoder_decoder": 286785,
}


class TestSpecs:
    @pytest.mark.parametrize("family", NEURAL_FAMILIES)
    def test_closed_form_matches_tensor_walk(self, family):
        spec = default_spec(family)
        model = build_model(spec, 24, 13)
        assert closed_form_parameter_count(spec, 24, 13) == count_parameters(model) == EXPECTED_COUNTS[family]

    def test_every_neural_family_has_a_published_range(self):
        assert set(PUBLISHED_PARAM_RANGES) == set(NEURAL_FAMILIES)

    @settings(max_examples=40)
    @given(
        family=st.sampled_from(NEURAL_FAMILIES),
        widths=st.lists(st.integers(1, 9), min_size=2, max_size=4),
        lookback=st.integers(6, 12),
        d=st.integers(1, 5),
    )
    def test_closed_form_for_random_shapes(self, family, widths, lookback, d):
        base = default_spec(family)
        split = 1 if base.split else 0
        spec = replace(base, layer_widths=tuple(widths), activations=("tanh",) * len(widths), split=split)
        model = build_model(spec, lookback, d)
        assert closed_form_parameter_count(spec, lookback, d) == count_parameters(model)

    @pytest.mark.parametrize("family", NEURAL_FAMILIES)
    def test_output_shape(self, family, rng):
        model = build_model(default_spec(family), 24, 5)
        assert model.forward(rng.standard_normal((3, 24, 5))).shape == (3, 1)

    def test_default_is_unregularized(self):
        spec = default_spec("dnn")
        assert spec.dropout == 0.4
        assert spec.effective_dropout == 0.0 and spec.effective_l2 == 0.0
        reg = default_spec("dnn", regularized=True)
        assert reg.effective_dropout == 0.4 and reg.effective_l2 == 1e-4
        assert reg.label == "Reg. DNN" and spec.label == "DNN"

    def test_regularized_twin_shares_initial_weights(self):
        a = build_model(default_spec("lstm"), 24, 4, seed=5)
        b = build_model(default_spec("lstm", regularized=True), 24, 4, seed=5)
        for k, v in a.params().items():
            assert np.array_equal(v, b.params()[k])

    @pytest.mark.parametrize(
        "change",
        [
            {"family": "gru"},
            {"layer_widths": ()},
            {"activations": ("relu",)},
            {"dropout": 1.0},
            {"optimizer": "sgd"},
            {"split": 0},
        ],
    )
    def test_invalid_specs(self, change):
        with pytest.raises(InvalidSpec):
            replace(default_spec("cnn"), **change).validate()

    def test_arima_is_not_buildable(self):
        with pytest.raises(InvalidSpec):
            build_model(default_spec("arima"), 24, 3)

    def test_lookback_too_short_for_convs(self):
        with pytest.raises(InvalidSpec):
            build_model(default_spec("cnn"), 4, 3)

    @pytest.mark.parametrize("family", FAMILIES)
    def test_spec_dict_round_trip(self, family):
        spec = default_spec(family, regularized=True)
        assert ModelSpec.from_dict(spec.to_dict()) == spec


class TestWindows:
    def test_alignment(self):
        X = np.arange(10.0)[:, None]
        y = np.arange(10.0) * 10
        W, t = make_windows(X, y, 3)
        assert W.shape == (7, 3, 1)
        assert_allclose(W[0, :, 0], [0, 1, 2])
        assert t[0] == 30

    @settings(max_examples=50)
    @given(n=st.integers(5, 60), lookback=st.integers(1, 4), cut=st.floats(0.2, 0.8))
    def test_partitions_never_cross(self, n, lookback, cut):
        b = int(n * cut)
        if b <= lookback or n - b <= lookback:
            return
        X = np.arange(n, dtype=float)[:, None]
        (Wa, ta, ra), (Wb, tb, rb) = partition_windows(X, X[:, 0], lookback, [(0, b), (b, n)])
        assert Wa.max() < b and ra.max() < b
        assert Wb.min() >= b and rb.min() >= b + lookback
        # every window ends the row before its target
        assert_allclose(Wb[:, -1, 0] + 1, tb)

    def test_too_short(self):
        with pytest.raises(TooShort):
            make_windows(np.zeros((3, 1)), np.zeros(3), 3)


def _simulate(n, phi=(), theta=(), c=0.0, seed=0):
    rng = np.random.default_rng(seed)
    e = rng.standard_normal(n + 100)
    w = np.zeros(n + 100)
    for t in range(n + 100):
        ar = sum(p * w[t - i - 1] for i, p in enumerate(phi) if t - i - 1 >= 0)
        ma = sum(q * e[t - j - 1] for j, q in enumerate(theta) if t - j - 1 >= 0)
        w[t] = c + ar + e[t] + ma
    return w[100:]


class TestArima:
    def test_residual_recursion_matches_loop(self, rng):
        w = rng.standard_normal(40)
        c, phi, theta = 0.3, np.array([0.5, -0.2]), np.array([0.4])
        e = css_residuals(w, c, phi, theta)
        ref = []
        for t in range(2, 40):
            prev = ref[-1] if ref else 0.0
            ref.append(w[t] - c - phi[0] * w[t - 1] - phi[1] * w[t - 2] - theta[0] * prev)
        assert_allclose(e, ref, atol=1e-12)

    def test_css_gradient(self, rng):
        w = rng.standard_normal(60)
        x = np.array([0.1, 0.3, -0.2, 0.25, 0.1])

        def f():
            return _css_and_grad(w, _lagged(w, 2), x[0], x[1:3], x[3:])[0]

        g = _css_and_grad(w, _lagged(w, 2), x[0], x[1:3], x[3:])[1]
        assert_allclose(g, numeric_grad(f, x), rtol=1e-6, atol=1e-9)

    def test_pure_ar_matches_least_squares(self):
        # with q = 0 the CSS objective is ordinary least squares
        w = _simulate(800, phi=(0.6, -0.25), c=0.4, seed=1)
        params = fit_arima(w, (2, 0, 0))
        A = np.column_stack([np.ones(798), w[1:-1], w[:-2]])
        beta = np.linalg.lstsq(A, w[2:], rcond=None)[0]
        assert_allclose([params.intercept, *params.ar], beta, atol=2e-3)

    def test_recovers_ma_coefficient(self):
        w = _simulate(3000, theta=(0.5,), seed=2)
        assert abs(fit_arima(w, (0, 0, 1)).ma[0] - 0.5) < 0.05

    def test_white_noise_intercept_is_mean(self, rng):
        y = rng.normal(3.0, 1.0, 500)
        assert_allclose(fit_arima(y, (0, 0, 0)).intercept, y.mean(), atol=1e-4)

    def test_random_walk_forecast_error(self):
        y = np.cumsum(np.random.default_rng(4).standard_normal(1000))
        _, fc = arima_fit_forecast(y, (0, 1, 0), 800)
        err = np.sqrt(np.mean((y[800:] - fc) ** 2))
        assert 0.85 < err < 1.15

    def test_forecasts_use_only_the_past(self, rng):
        y = np.cumsum(rng.standard_normal(300))
        params = fit_arima(y[:200], (1, 1, 1))
        a = one_step_predictions(y, params)
        y2 = y.copy()
        y2[250:] += 100.0
        b = one_step_predictions(y2, params)
        assert_allclose(a[:251], b[:251], equal_nan=True)
        assert np.isnan(a[:2]).all() and np.isfinite(a[2:]).all()

    def test_invertibility_projection(self):
        theta = _make_invertible(np.array([1.5]))
        assert np.all(np.abs(np.roots(np.r_[1.0, theta])) < 1.0)
        assert_allclose(_make_invertible(np.array([0.3])), [0.3])

    def test_invalid_orders(self):
        with pytest.raises(InvalidOrders):
            fit_arima(np.zeros(50), (1, 3, 0))

    def test_select_orders_prefers_true_structure(self):
        y = np.cumsum(_simulate(600, phi=(0.7,), seed=5))
        p, d, q = select_orders(y, 450, p_values=(0, 1), q_values=(0,))
        assert (p, d, q) == (1, 1, 0)
