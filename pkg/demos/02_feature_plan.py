"""
Leak-free feature preparation
=============================

Every transform (imputation, category encoding, calendar terms, differencing,
correlation filtering, scaling, PCA) is fitted on training rows only and
frozen into a plan. Replaying the plan on the full table gives model inputs
whose training part cannot see the validation period.
"""

import numpy as np

from renewcast.features import PipelineOptions, apply_plan, chronological_split, fit_plan
from renewcast.ingest import CATEGORICAL, ColumnMeta, SyntheticSpec, generate_synthetic

table = generate_synthetic(SyntheticSpec(n_rows=2000, trend_slope=1e-4, missing_rate=0.01, n_covariates=3, seed=1))
sites = np.random.default_rng(1).choice(["north", "south"], size=table.n_rows).astype(object)
table = table.with_column(ColumnMeta("site", CATEGORICAL), sites)

# the last 20% of rows are held out
train, val = chronological_split(table.n_rows, 0.2)
plan = fit_plan(table, "target", train, PipelineOptions(pca=False))
print("differenced columns:", {k: v for k, v in plan.get("stationarity")["orders"].items() if v})
print("dropped by correlation filter:", plan.get("correlation")["dropped"])
print("model features:", plan.get("features"))

design = apply_plan(plan, table)
print("design matrix", design.X.shape, "training rows scaled into",
      np.round(design.X[: train[1]].min(), 3), "..", np.round(design.X[: train[1]].max(), 3))

# changing validation values leaves every fitted quantity untouched
moved = table.with_column(table.meta("x1"), np.where(np.arange(table.n_rows) >= train[1], 100.0, table.column("x1")))
again = fit_plan(moved, "target", train, PipelineOptions(pca=False))
print("scaling unchanged:", plan.get("scaling").to_dict() == again.get("scaling").to_dict())
