"""
The command-line interface
==========================

``renewcast`` exposes the pipeline as four subcommands: ``inspect`` writes
the exploratory tables, ``run`` performs the ratio sweep, ``hpo`` runs the
search alone and ``report`` re-emits CSVs from a finished run's manifest.
Here they are driven through :func:`renewcast.cli.main`, which takes the same
arguments as the shell command and returns its exit code.
"""

import json
import tempfile
from pathlib import Path

from renewcast.cli import main

here = Path(__file__).parent
work = Path(tempfile.mkdtemp())

# exploratory tables: descriptive statistics, unit-root tests, MI and PCA
code = main(["inspect", "--dataset", "synthetic", "--synthetic-rows", "1500", "--seed", "1", "--out", str(work / "inspect")])
print("inspect exit code", code, sorted(p.name for p in (work / "inspect").iterdir()))
print((work / "inspect" / "stationarity.csv").read_text())

# a sweep configured from YAML, with one value overridden on the command line
code = main(["run", "--config", str(here / "run_config.yaml"), "--out", str(work / "run"), "--no-plots", "--patience", "3"])
print("run exit code", code)
print((work / "run" / "metrics.csv").read_text().splitlines()[0])
manifest = json.loads((work / "run" / "manifest.json").read_text())
print("manifest status:", manifest["status"], "models:", list(manifest["models"]))

# the reports can be regenerated from the manifest alone, byte for byte
main(["report", "--manifest", str(work / "run" / "manifest.json"), "--out", str(work / "again")])
print("identical metrics.csv:", (work / "run" / "metrics.csv").read_bytes() == (work / "again" / "metrics.csv").read_bytes())

# a missing seed is a configuration error: exit code 2 and nothing written
print("exit code without seed:", main(["run", "--dataset", "synthetic", "--out", str(work / "bad")]), (work / "bad").exists())
