"""
Loading data and exploring it
=============================

A seeded synthetic hourly series stands in for the real datasets. We fill
its gaps, then look at the statistics used to vet features before modelling:
summary statistics, unit-root tests, mutual information with the target and
principal components.
"""

import numpy as np

from renewcast.ingest import SyntheticSpec, drop_sparse_columns, generate_synthetic, impute_gaps
from renewcast.stats import mutual_information, pca_fit, stationarity_report, summary_stats

# one daily cycle, a slow trend, noise and 2% of cells knocked out
table = generate_synthetic(SyntheticSpec(n_rows=3000, trend_slope=1e-4, noise_std=0.05, missing_rate=0.02, n_covariates=3, seed=7))
print(table.names, table.n_rows)
print("missing cells per column:", {n: int(np.isnan(table.column(n)).sum()) for n in table.names[1:]})

# columns that are mostly empty go first, then short gaps are interpolated
table, dropped = drop_sparse_columns(table, 0.5)
filled = impute_gaps(table)
print("dropped:", dropped)

# summary statistics of the target
print(summary_stats(filled.column("target")))

# ADF (null: unit root) and KPSS (null: stationary) combine into one verdict;
# the trend makes the target fail, the feature plan differences such columns
for name in ("target", "x1"):
    report = stationarity_report(filled.column(name))
    print(f"{name}: ADF {report.adf_stat:.2f} (p={report.adf_pvalue:.3g}), KPSS {report.kpss_stat:.3f} -> {report.verdict}")

# a random walk fails the same test
walk = np.cumsum(np.random.default_rng(0).standard_normal(3000))
print("random walk ->", stationarity_report(walk).verdict)

# histogram mutual information in nats; the covariates share the target's cycle
y = filled.column("target")
for name in ("x1", "x2", "x3"):
    print(f"I({name}; target) = {mutual_information(filled.column(name), y):.3f}")

# how many components keep 80% of the covariate variance
X = np.column_stack([filled.column(n) for n in ("x1", "x2", "x3")])
model = pca_fit(X, 0.8)
print("components kept:", model.n_components, "explained:", np.round(model.explained_variance_ratio, 3))
