"""Run configuration and the end-to-end pipeline behind the command line.

Order of work: load data, drop sparse columns, exploratory statistics,
optional hyperparameter search, the ratio sweep, Friedman comparison and
report emission. The manifest is written before any model trains and
rewritten with results at the end.
"""
from __future__ import annotations

import hashlib
import json
import platform
import time
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

import numpy as np
import scipy
import yaml

from . import __version__
from .datasets import DATASET1_TARGET, DATASET2_TARGET, load_dataset1, load_dataset2
from .errors import ConfigInvalid, DatasetMissing
from .evaluation import RATIOS, EvalSettings, emit_report, friedman_table, ratio_sweep, report_summary, write_json
from .features import PipelineOptions
from .hpo import SearchSpace, SplitEvaluator, grid_refine, overfitting_table, random_search, spec_from_config, write_trial_log
from .ingest import CONTINUOUS, TARGET, SyntheticSpec, TimeSeriesTable, drop_sparse_columns, generate_synthetic
from .models import FAMILIES, NEURAL_FAMILIES, default_spec

DATASETS = ("dataset1", "dataset2", "synthetic")
VARIANTS = ("plain", "regularized")
MANIFEST_FORMAT = 1

EXIT_OK = 0
EXIT_PARTIAL = 1
EXIT_CONFIG = 2


@dataclass
class RunConfig:
    seed: int | None = None
    dataset: str = "synthetic"
    weather_csv: str | None = None
    generation_csv: str | None = None
    data_csv: str | None = None
    families: tuple = ("dnn",)
    variants: tuple = ("plain",)
    ratios: tuple = RATIOS
    k: int = 5
    hpo_budget: int = 0
    out: str = "results"
    jobs: int = 1
    lookback: int | None = None
    max_epochs: int = 100
    patience: int = 10
    precision: str = "float32"
    sparse_threshold: float = 0.15
    impute: bool = True
    calendar: bool = True
    encode: bool = True
    stationarize: bool = True
    correlation_filter: bool = True
    correlation_threshold: float = 0.1
    pca: bool = True
    variance_target: float = 0.8
    synthetic_rows: int = 5000
    synthetic_covariates: int = 3
    plots: bool = True

    @property
    def effective_lookback(self) -> int:
        if self.lookback is not None:
            return self.lookback
        return 12 if self.dataset == "dataset2" else 24

    def pipeline_options(self) -> PipelineOptions:
        return PipelineOptions(
            impute=self.impute, calendar=self.calendar, encode=self.encode, stationarize=self.stationarize,
            correlation_filter=self.correlation_filter, correlation_threshold=self.correlation_threshold,
            pca=self.pca, variance_target=self.variance_target,
        )

    def eval_settings(self) -> EvalSettings:
        return EvalSettings(self.effective_lookback, self.max_epochs, self.patience, self.precision, self.pipeline_options())

    def synthetic_spec(self) -> SyntheticSpec:
        return SyntheticSpec(
            n_rows=self.synthetic_rows, trend_slope=1e-4, noise_std=0.05, missing_rate=0.01,
            n_covariates=self.synthetic_covariates, seed=self.seed,
        )

    def validate(self, check_paths: bool = True) -> RunConfig:
        if self.seed is None:
            raise ConfigInvalid("seed", "a seed is mandatory")
        if not isinstance(self.seed, int) or self.seed < 0:
            raise ConfigInvalid("seed", "must be a non-negative integer")
        if self.dataset not in DATASETS:
            raise ConfigInvalid("dataset", f"must be one of {DATASETS}")
        if not self.families:
            raise ConfigInvalid("families", "at least one family is required")
        bad = [f for f in self.families if f not in FAMILIES]
        if bad:
            raise ConfigInvalid("families", f"unknown families {bad}")
        bad = [v for v in self.variants if v not in VARIANTS]
        if bad or not self.variants:
            raise ConfigInvalid("variants", f"must be a nonempty subset of {VARIANTS}")
        if not self.ratios or any(not 0.0 < float(r) < 1.0 for r in self.ratios):
            raise ConfigInvalid("ratios", "every ratio must lie strictly between 0 and 1")
        if len(set(self.ratios)) != len(self.ratios):
            raise ConfigInvalid("ratios", "ratios must be distinct")
        if self.k < 1:
            raise ConfigInvalid("k", "must be at least 1")
        if self.hpo_budget < 0:
            raise ConfigInvalid("hpo_budget", "must be non-negative")
        if self.jobs < 1:
            raise ConfigInvalid("jobs", "must be at least 1")
        if self.effective_lookback < 1:
            raise ConfigInvalid("lookback", "must be at least 1")
        if self.max_epochs < 1:
            raise ConfigInvalid("max_epochs", "must be at least 1")
        if self.patience < 1:
            raise ConfigInvalid("patience", "must be at least 1")
        if self.precision not in ("float32", "float64"):
            raise ConfigInvalid("precision", "must be float32 or float64")
        if not 0.0 < self.variance_target <= 1.0:
            raise ConfigInvalid("variance_target", "must lie in (0, 1]")
        if not 0.0 <= self.sparse_threshold <= 1.0:
            raise ConfigInvalid("sparse_threshold", "must lie in [0, 1]")
        if self.dataset == "synthetic" and self.synthetic_rows < 100:
            raise ConfigInvalid("synthetic_rows", "must be at least 100")
        if check_paths:
            needed = {"dataset1": ("weather_csv", "generation_csv"), "dataset2": ("data_csv",)}.get(self.dataset, ())
            for name in needed:
                value = getattr(self, name)
                if not value:
                    raise ConfigInvalid(name, f"required for {self.dataset}")
                if not Path(value).is_file():
                    raise DatasetMissing(f"{name}: file not found: {value}")
        return self

    def to_dict(self) -> dict:
        d = asdict(self)
        d["families"] = list(self.families)
        d["variants"] = list(self.variants)
        d["ratios"] = [float(r) for r in self.ratios]
        return d


_SECTIONS = {
    "paths": ("weather_csv", "generation_csv", "data_csv"),
    "pipeline": ("impute", "calendar", "encode", "stationarize", "correlation_filter", "correlation_threshold", "pca", "variance_target", "sparse_threshold"),
    "models": ("families", "variants"),
    "evaluation": ("ratios", "k", "lookback", "max_epochs", "patience", "precision", "plots"),
    "hpo": ("budget",),
    "synthetic": ("rows", "covariates"),
}
_SECTION_PREFIX = {"hpo": "hpo_", "synthetic": "synthetic_"}


def _flatten_config(doc: dict) -> dict:
    """Nested YAML sections to flat RunConfig field names."""
    known = {f.name for f in fields(RunConfig)}
    flat = {}
    for key, value in (doc or {}).items():
        if key in _SECTIONS:
            if not isinstance(value, dict):
                raise ConfigInvalid(key, "section must be a mapping")
            for sub, v in value.items():
                if sub not in _SECTIONS[key]:
                    raise ConfigInvalid(f"{key}.{sub}", "unknown key")
                flat[_SECTION_PREFIX.get(key, "") + sub] = v
        elif key in known:
            flat[key] = value
        else:
            raise ConfigInvalid(key, "unknown key")
    return flat


def _coerce(flat: dict) -> dict:
    out = dict(flat)
    for name in ("families", "variants", "ratios"):
        if name in out and isinstance(out[name], str):
            out[name] = [s.strip() for s in out[name].split(",") if s.strip()]
    if "families" in out:
        fams = []
        for f in out["families"]:
            fams.extend(FAMILIES if f == "all" else NEURAL_FAMILIES if f == "neural" else [f])
        out["families"] = tuple(dict.fromkeys(fams))
    if "variants" in out:
        out["variants"] = tuple(out["variants"])
    if "ratios" in out:
        try:
            out["ratios"] = tuple(float(r) for r in out["ratios"])
        except (TypeError, ValueError):
            raise ConfigInvalid("ratios", "ratios must be numbers") from None
    for name in ("seed", "k", "hpo_budget", "jobs", "lookback", "max_epochs", "patience", "synthetic_rows", "synthetic_covariates"):
        if name in out and out[name] is not None:
            try:
                out[name] = int(out[name])
            except (TypeError, ValueError):
                raise ConfigInvalid(name, "must be an integer") from None
    return out


def load_config(path=None, overrides: dict | None = None) -> RunConfig:
    """Read a YAML config (optional) and apply non-None overrides on top."""
    flat = {}
    if path is not None:
        p = Path(path)
        if not p.is_file():
            raise ConfigInvalid("config", f"file not found: {path}")
        try:
            doc = yaml.safe_load(p.read_text())
        except yaml.YAMLError as exc:
            raise ConfigInvalid("config", f"not valid YAML: {exc}") from None
        if doc is not None and not isinstance(doc, dict):
            raise ConfigInvalid("config", "top level must be a mapping")
        flat.update(_flatten_config(doc))
    flat.update({k: v for k, v in (overrides or {}).items() if v is not None})
    return RunConfig(**_coerce(flat))


# ---------------------------------------------------------------------------


def load_table(config: RunConfig):
    """Return ``(table, target)`` for the configured dataset."""
    if config.dataset == "dataset1":
        return load_dataset1(config.generation_csv, config.weather_csv), DATASET1_TARGET
    if config.dataset == "dataset2":
        return load_dataset2(config.data_csv), DATASET2_TARGET
    return generate_synthetic(config.synthetic_spec()), "target"


def model_specs(config: RunConfig, tuned: dict | None = None) -> list:
    tuned = tuned or {}
    specs = []
    for fam in config.families:
        base = tuned.get(fam) or default_spec(fam)
        if fam == "arima":
            specs.append(base)
            continue
        for variant in config.variants:
            specs.append(replace(base, regularized=variant == "regularized"))
    return specs


def _file_sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def base_manifest(config: RunConfig, command: str) -> dict:
    inputs = {}
    for name in ("weather_csv", "generation_csv", "data_csv"):
        value = getattr(config, name)
        if value and Path(value).is_file():
            inputs[name] = {"file": Path(value).name, "sha256": _file_sha256(value)}
    cfg = config.to_dict()
    # where and how many workers do not change results, so they stay out of the record
    cfg.pop("out")
    cfg.pop("jobs")
    for name in ("weather_csv", "generation_csv", "data_csv"):
        if cfg[name]:
            cfg[name] = Path(cfg[name]).name
    return {
        "format_version": MANIFEST_FORMAT,
        "command": command,
        "config": cfg,
        "inputs": inputs,
        "versions": {
            "renewcast": __version__,
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "python": platform.python_version(),
        },
        "status": "running",
    }


def manifest_digest(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def prepare_table(config: RunConfig):
    table, target = load_table(config)
    table, dropped = drop_sparse_columns(table, config.sparse_threshold)
    return table, target, dropped


def run_hpo(config: RunConfig, table, target, out: Path, log=print) -> dict:
    """Search each neural family; returns family -> tuned ModelSpec plus audit records."""
    tuned, records = {}, {}
    space = SearchSpace()
    for fam in config.families:
        if fam == "arima":
            continue
        settings = replace(config.eval_settings(), max_epochs=min(config.max_epochs, 30), patience=min(config.patience, 5))
        evaluator = SplitEvaluator(fam, table, target, config.ratios, settings)
        ranked = random_search(space, fam, evaluator, config.hpo_budget, config.seed)
        refined = grid_refine(ranked[0], evaluator, space)
        write_trial_log(ranked + refined.evaluated, out / f"trials_{fam}.csv")
        spec = spec_from_config(fam, refined.best.config)
        tuned[fam] = spec
        records[fam] = {
            "chosen": refined.best.to_dict(),
            "refined": refined.improved,
            "top_trials": overfitting_table(ranked),
            "spec": spec.to_dict(),
        }
        log(f"hpo {fam}: mean val rmse {refined.best.mean_rmse:.6g}")
    return {"tuned": tuned, "records": records}


def execute_config(config: RunConfig, command: str = "run", log=print):
    """Run the full pipeline; returns ``(exit_code, files)``."""
    config.validate()
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    manifest = base_manifest(config, command)
    manifest_path = out / "manifest.json"
    write_json(manifest_path, manifest)
    timings = {}

    t0 = time.perf_counter()
    table, target, dropped = prepare_table(config)
    timings["load"] = time.perf_counter() - t0
    manifest["data"] = {"rows": table.n_rows, "columns": table.names, "target": target, "dropped_sparse": dropped}
    log(f"loaded {table.n_rows} rows, {len(table.names)} columns; target {target}")
    t0 = time.perf_counter()
    manifest["exploration"] = exploration_summary(table, target, config.variance_target)
    timings["exploration"] = time.perf_counter() - t0

    tuned = {}
    if config.hpo_budget > 0:
        t0 = time.perf_counter()
        hpo = run_hpo(config, table, target, out, log)
        tuned = hpo["tuned"]
        manifest["hpo"] = hpo["records"]
        timings["hpo"] = time.perf_counter() - t0
    specs = model_specs(config, tuned)
    manifest["models"] = {s.label: s.to_dict() for s in specs}
    write_json(manifest_path, manifest)

    t0 = time.perf_counter()
    report = ratio_sweep(specs, table, target, config.ratios, config.k, config.seed, config.eval_settings(), config.jobs,
                         progress=lambda cell, fold: log(f"{cell.label} ratio {cell.ratio:g} fold {fold}: val rmse {cell.folds[-1].val_rmse:.4g}"))
    timings["sweep"] = time.perf_counter() - t0
    friedman = friedman_table(report)
    manifest["plans"] = report.plans
    manifest["fold_seeds"] = report.seeds
    manifest["report"] = report_summary(report)
    manifest["friedman"] = {m: r.to_dict() for m, r in friedman.items()}
    manifest["status"] = "complete" if report.n_failed == 0 else "partial"
    files = emit_report(report, out, friedman, manifest, plots=config.plots)
    write_json(out / "timings.json", {k: round(v, 3) for k, v in timings.items()})
    for cell in report.ordered_cells():
        if cell.status != "ok":
            log(f"cell failed: {cell.label} ratio {cell.ratio:g}: {cell.error}")
    return (EXIT_OK if report.n_failed == 0 else EXIT_PARTIAL), files


def execute_hpo(config: RunConfig, log=print):
    config.validate()
    if config.hpo_budget < 1:
        raise ConfigInvalid("hpo_budget", "hpo needs a budget of at least 1")
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    manifest = base_manifest(config, "hpo")
    write_json(out / "manifest.json", manifest)
    table, target, dropped = prepare_table(config)
    hpo = run_hpo(config, table, target, out, log)
    manifest["hpo"] = hpo["records"]
    manifest["status"] = "complete"
    write_json(out / "manifest.json", manifest)
    return EXIT_OK


def re_emit(manifest_path, out_dir=None):
    """Rewrite the CSV reports from a finished run's manifest without retraining."""
    from .evaluation import report_from_summary

    doc = json.loads(Path(manifest_path).read_text())
    if "report" not in doc:
        raise ConfigInvalid("manifest", "manifest holds no sweep results")
    report = report_from_summary(doc["report"])
    out = Path(out_dir) if out_dir else Path(manifest_path).parent
    return emit_report(report, out, plots=False)


# ---------------------------------------------------------------------------
# exploratory statistics (the ``inspect`` command)


def _filled_continuous(table: TimeSeriesTable):
    from .ingest import impute_gaps

    filled = impute_gaps(table)
    names = [n for n in filled.names_of_kind(CONTINUOUS, TARGET) if not np.isnan(filled.column(n)).any()]
    return filled, names


def stationarity_rows(filled: TimeSeriesTable, names) -> list:
    """One ADF/KPSS row per variable: statistics, p-values, lags and joint verdict."""
    from .errors import DegenerateSeries, SingularDesign, TooShort
    from .stats import stationarity_report

    rows = []
    for name in names:
        try:
            rows.append({"variable": name, **stationarity_report(filled.column(name)).to_dict()})
        except (DegenerateSeries, SingularDesign, TooShort) as exc:
            rows.append({"variable": name, "verdict": f"untestable ({type(exc).__name__})"})
    return rows


def pca_summary(filled: TimeSeriesTable, features, variance_target: float = 0.8):
    """Explained-variance rows for every component plus loadings of the selected ones.

    Features are min-max scaled over the whole table first, as in exploration
    (model training refits PCA on training rows only).
    """
    from .stats import pca_fit

    if len(features) < 2:
        return [], []
    M = np.column_stack([filled.column(n) for n in features])
    lo, hi = M.min(axis=0), M.max(axis=0)
    M = (M - lo) / np.where(hi > lo, hi - lo, 1.0)
    model = pca_fit(M, variance_target)
    full = pca_fit(M, n_components=min(M.shape))
    cum = np.cumsum(full.explained_variance_ratio)
    rows = [{"component": i, "explained_variance_ratio": r, "cumulative": c, "selected": i <= model.n_components}
            for i, (r, c) in enumerate(zip(full.explained_variance_ratio, cum), 1)]
    loadings = [{"variable": name, **{f"pc{j + 1}": float(model.components[j, i]) for j in range(model.n_components)}}
                for i, name in enumerate(features)]
    return rows, loadings


def inspect_tables(table: TimeSeriesTable, target: str, variance_target: float = 0.8) -> dict:
    """Descriptive, stationarity, mutual-information and PCA tables as CSV-ready rows."""
    from .errors import TooFewSamples
    from .stats import mutual_information, summary_stats

    filled, names = _filled_continuous(table)
    descriptive, mi = [], []
    y = filled.column(target) if target in names else None
    for name in names:
        x = filled.column(name)
        try:
            descriptive.append({"variable": name, **summary_stats(x).to_dict()})
        except TooFewSamples:
            pass
        if name != target and y is not None:
            mi.append({"variable": name, "mutual_information": mutual_information(x, y)})
    mi.sort(key=lambda r: -r["mutual_information"])
    pca_rows, loadings = pca_summary(filled, [n for n in names if n != target], variance_target)
    return {"descriptive": descriptive, "stationarity": stationarity_rows(filled, names), "mutual_information": mi,
            "pca": pca_rows, "pca_loadings": loadings}


def exploration_summary(table: TimeSeriesTable, target: str, variance_target: float = 0.8) -> dict:
    """Stationarity rows and PCA selection stored in the run manifest."""
    filled, names = _filled_continuous(table)
    pca_rows, loadings = pca_summary(filled, [n for n in names if n != target], variance_target)
    return {"stationarity": stationarity_rows(filled, names), "pca": pca_rows, "pca_loadings": loadings}


def write_rows_csv(path, rows):
    import csv

    from .evaluation import fmt

    if not rows:
        Path(path).write_text("")
        return
    header = list(dict.fromkeys(k for r in rows for k in r))
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([fmt(v) if isinstance(v, float) else ("" if v is None else str(v).lower() if isinstance(v, bool) else v) for v in (r.get(h) for h in header)])


def execute_inspect(config: RunConfig, log=print):
    config.validate()
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    table, target, dropped = prepare_table(config)
    tables = inspect_tables(table, target, config.variance_target)
    for name, rows in tables.items():
        write_rows_csv(out / f"{name}.csv", rows)
    n_stat = sum(r.get("verdict") == "stationary" for r in tables["stationarity"])
    n_pc = sum(bool(r["selected"]) for r in tables["pca"])
    log(f"{len(tables['stationarity'])} variables tested, {n_stat} stationary; {n_pc} principal components reach {config.variance_target:.0%}")
    if dropped:
        log(f"dropped sparse columns: {', '.join(dropped)}")
    return EXIT_OK
