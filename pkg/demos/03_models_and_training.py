"""
Building and training the model families
========================================

Each family has a default layer stack. Models are plain NumPy layers trained
with Adam and early stopping; parameter counts come both from a closed form
and from walking the built weights. ARIMA serves as the statistical baseline.
"""

from dataclasses import replace

import numpy as np

from renewcast.evaluation import EvalSettings, evaluate_split
from renewcast.ingest import SyntheticSpec, generate_synthetic
from renewcast.models import (
    DISPLAY_NAMES,
    NEURAL_FAMILIES,
    arima_fit_forecast,
    build_model,
    closed_form_parameter_count,
    count_parameters,
    default_spec,
)

# parameter counts for a 24-step window of 13 features
for family in NEURAL_FAMILIES:
    spec = default_spec(family)
    model = build_model(spec, lookback=24, n_features=13, seed=0)
    print(f"{DISPLAY_NAMES[family]:22s} {count_parameters(model):>8d}  closed form {closed_form_parameter_count(spec, 24, 13)}")

# train a DNN and its L2 + dropout variant on one chronological split
table = generate_synthetic(SyntheticSpec(n_rows=3000, trend_slope=1e-4, noise_std=0.05, seed=2))
settings = EvalSettings(max_epochs=30, patience=5)
for spec in (default_spec("dnn"), replace(default_spec("dnn"), regularized=True)):
    out = evaluate_split(spec, table, "target", ratio=0.2, seed=0, settings=settings)
    print(f"{spec.label}: train RMSE {out.metrics.train_rmse:.4f}, validation RMSE {out.metrics.val_rmse:.4f}, stopped after {out.stopped_epoch} epochs")

# ARIMA(2,1,2) fitted by conditional sum of squares, one-step forecasts
y = table.column("target")
params, forecasts = arima_fit_forecast(y, (2, 1, 2), train_rows=2400)
print("ARIMA AR", np.round(params.ar, 3), "MA", np.round(params.ma, 3))
print(f"ARIMA one-step RMSE on the last 600 rows: {np.sqrt(np.mean((forecasts - y[2400:]) ** 2)):.4f}")
