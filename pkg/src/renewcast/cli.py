"""Command-line entry point: ``renewcast {inspect,run,hpo,report}``.

Exit codes: 0 success, 1 some sweep cells failed, 2 configuration or input error.
"""
from __future__ import annotations

import argparse
import sys

from .errors import ConfigInvalid, DatasetMissing, RenewcastError
from .pipeline import DATASETS, EXIT_CONFIG, execute_config, execute_hpo, execute_inspect, load_config, re_emit


def _add_common(p: argparse.ArgumentParser):
    p.add_argument("--config", help="YAML run configuration; flags override its values")
    p.add_argument("--dataset", choices=DATASETS)
    p.add_argument("--weather-csv", dest="weather_csv")
    p.add_argument("--generation-csv", dest="generation_csv")
    p.add_argument("--data-csv", dest="data_csv", help="single-file dataset (dataset2)")
    p.add_argument("--seed", type=int, help="master seed (mandatory, here or in the config)")
    p.add_argument("--out", help="output directory")
    p.add_argument("--sparse-threshold", dest="sparse_threshold", type=float)
    p.add_argument("--synthetic-rows", dest="synthetic_rows", type=int)


def _add_training(p: argparse.ArgumentParser):
    p.add_argument("--families", help="comma-separated families, or 'all' / 'neural'")
    p.add_argument("--variants", help="comma-separated subset of plain,regularized")
    p.add_argument("--regularized", action="store_true", help="shorthand for --variants regularized")
    p.add_argument("--ratios", help="comma-separated validation ratios")
    p.add_argument("--k", type=int, help="forward-chaining folds per ratio")
    p.add_argument("--lookback", type=int)
    p.add_argument("--max-epochs", dest="max_epochs", type=int)
    p.add_argument("--patience", type=int)
    p.add_argument("--precision", choices=("float32", "float64"))
    p.add_argument("--jobs", type=int, help="worker processes for the sweep")
    p.add_argument("--hpo-budget", dest="hpo_budget", type=int)
    p.add_argument("--no-plots", dest="plots", action="store_false", default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="renewcast", description="Renewable-generation forecasting benchmark.")
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("inspect", help="descriptive, stationarity, mutual-information and PCA tables")
    _add_common(p)
    p = sub.add_parser("run", help="ratio sweep with forward-chaining folds and Friedman comparison")
    _add_common(p)
    _add_training(p)
    p = sub.add_parser("hpo", help="random search plus grid refinement per family")
    _add_common(p)
    _add_training(p)
    p = sub.add_parser("report", help="re-emit CSV reports from a finished run")
    p.add_argument("--manifest", required=True, help="manifest.json of a finished run")
    p.add_argument("--out", help="output directory (defaults to the manifest's)")
    return parser


_NON_CONFIG = {"command", "config", "regularized", "manifest"}


def _overrides(args) -> dict:
    over = {k: v for k, v in vars(args).items() if k not in _NON_CONFIG and v is not None}
    if getattr(args, "regularized", False):
        over["variants"] = "regularized"
    return over


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "report":
            files = re_emit(args.manifest, args.out)
            print(f"wrote {', '.join(sorted(p.name for p in files.values()))}")
            return 0
        config = load_config(args.config, _overrides(args))
        config.validate()
        if args.command == "inspect":
            return execute_inspect(config)
        if args.command == "hpo":
            return execute_hpo(config)
        code, files = execute_config(config)
        print(f"results in {config.out}")
        return code
    except (ConfigInvalid, DatasetMissing) as exc:
        print(f"renewcast: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except RenewcastError as exc:
        print(f"renewcast: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
