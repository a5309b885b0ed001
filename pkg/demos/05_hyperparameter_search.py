"""
Hyperparameter search
=====================

Random search samples depth, width, learning rate, dropout, batch size and
activation, scoring each configuration by its mean validation RMSE over
several chronological splits. A one-step grid around the winner (learning
rate, width, dropout) then refines it, keeping the incumbent on ties.
"""

import tempfile
from pathlib import Path

from renewcast.evaluation import EvalSettings
from renewcast.hpo import SearchSpace, SplitEvaluator, grid_refine, overfitting_table, random_search, spec_from_config, write_trial_log
from renewcast.ingest import SyntheticSpec, generate_synthetic

table = generate_synthetic(SyntheticSpec(n_rows=1200, trend_slope=1e-4, noise_std=0.05, seed=5))
# short training keeps the demo quick; real searches use up to 30 epochs
evaluator = SplitEvaluator("dnn", table, "target", ratios=(0.2, 0.3), settings=EvalSettings(max_epochs=5, patience=2))

space = SearchSpace()
ranked = random_search(space, "dnn", evaluator, budget=4, seed=0)
for t in ranked:
    print(t.trial_id, t.status, f"{t.mean_rmse:.4f}", t.config)

# train/validation gap of the best trials, the overfitting signal
for row in overfitting_table(ranked, top=3):
    print(row)

refined = grid_refine(ranked[0], evaluator, space)
print(f"grid refinement evaluated {len(refined.evaluated)} neighbours, improved: {refined.improved}")
print("chosen spec:", spec_from_config("dnn", refined.best.config))

log = Path(tempfile.mkdtemp()) / "trials_dnn.csv"
write_trial_log(ranked + refined.evaluated, log)
print("trial log:", log, len(log.read_text().splitlines()) - 1, "rows")
