from dataclasses import replace

import numpy as np
import pytest
from numpy.testing import assert_allclose

from renewcast.errors import DivergenceDetected, ShapeMismatch
from renewcast.models import architecture, build_model, default_spec, model_from_architecture
from renewcast.nn import TrainConfig, fit, load_checkpoint, predict, save_checkpoint


def _data(rng, n=300, L=6, d=2):
    X = rng.standard_normal((n, L, d))
    y = 0.5 * X[:, -1, 0] - 0.3 * X[:, -1, 1]
    return X, y


@pytest.fixture
def small_spec():
    return replace(default_spec("dnn"), layer_widths=(16, 8), activations=("relu", "relu"))


class TestFit:
    def test_learns_linear_target(self, rng, small_spec):
        X, y = _data(rng)
        model = build_model(small_spec, 6, 2, seed=0)
        res = fit(model, (X[:240], y[:240]), (X[240:], y[240:]), TrainConfig(learning_rate=1e-2, max_epochs=60, patience=60))
        assert res.history[-1].val_rmse < 0.3 * res.history[0].val_rmse

    def test_same_seed_same_result(self, rng, small_spec):
        X, y = _data(rng)
        cfg = TrainConfig(max_epochs=5, seed=11, dropout_rate=0.3)
        runs = []
        for _ in range(2):
            m = build_model(replace(small_spec, regularized=True), 6, 2, seed=3)
            runs.append((fit(m, (X[:200], y[:200]), (X[200:], y[200:]), cfg).history, m.state()))
        assert runs[0][0] == runs[1][0]
        for k in runs[0][1]:
            assert np.array_equal(runs[0][1][k], runs[1][1][k])

    def test_early_stopping_restores_best(self, rng, small_spec):
        X, y = _data(rng)
        noise = rng.standard_normal(300)  # unlearnable validation target
        m = build_model(small_spec, 6, 2, seed=0)
        res = fit(m, (X[:200], y[:200]), (X[200:], noise[200:]), TrainConfig(learning_rate=1e-2, max_epochs=100, patience=3))
        assert res.stopped_epoch - res.best_epoch == 3
        best = min(h.val_loss for h in res.history)
        val_mse = float(np.mean((noise[200:] - predict(m, X[200:])) ** 2))
        assert_allclose(val_mse, best, rtol=1e-6)

    def test_loss_columns_include_penalty(self, rng, small_spec):
        X, y = _data(rng)
        m = build_model(small_spec, 6, 2, seed=0)
        res = fit(m, (X[:200], y[:200]), (X[200:], y[200:]), TrainConfig(max_epochs=2, l2_lambda=0.1))
        h = res.history[-1]
        assert h.val_loss > h.val_rmse**2
        assert h.train_loss > h.train_rmse**2

    @pytest.mark.filterwarnings("ignore::RuntimeWarning")
    def test_divergence_is_detected(self, rng, small_spec):
        X, y = _data(rng)
        m = build_model(small_spec, 6, 2, seed=0)
        with pytest.raises(DivergenceDetected):
            fit(m, (X[:200], y[:200] * 1e200), (X[200:], y[200:]), TrainConfig(learning_rate=1.0, max_epochs=3))

    def test_float32_training(self, rng, small_spec):
        X, y = _data(rng)
        m = build_model(small_spec, 6, 2, seed=0).astype(np.float32)
        res = fit(m, (X[:200], y[:200]), (X[200:], y[200:]), TrainConfig(max_epochs=3))
        assert all(p.dtype == np.float32 for p in m.params().values())
        assert np.isfinite(res.history[-1].val_rmse)

    def test_predict_rejects_flat_input(self, small_spec):
        with pytest.raises(ShapeMismatch):
            predict(build_model(small_spec, 6, 2), np.zeros((4, 12)))

    def test_invalid_config(self):
        with pytest.raises(ValueError):
            TrainConfig(dropout_rate=1.0)
        with pytest.raises(ValueError):
            TrainConfig(optimizer="sgd")


class TestCheckpoint:
    @pytest.mark.parametrize("family", ["lstm", "cnn", "encoder_decoder", "time_distributed_mlp"])
    def test_round_trip_predictions_identical(self, family, rng, tmp_path):
        spec = default_spec(family)
        model = build_model(spec, 24, 3, seed=9)
        for p in model.params().values():
            p += rng.normal(0, 0.01, p.shape)
        x = rng.standard_normal((5, 24, 3))
        path = tmp_path / "model.json"
        save_checkpoint(model, path, architecture(spec, 24, 3, 9))
        loaded = load_checkpoint(path, model_from_architecture)
        assert np.array_equal(predict(model, x), predict(loaded, x))

    def test_rejects_unknown_format(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text('{"format_version": 99}')
        with pytest.raises(ValueError):
            load_checkpoint(path, model_from_architecture)
