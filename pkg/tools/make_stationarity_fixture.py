"""Regenerate tests/fixtures/stationarity_reference.json with statsmodels as the reference.

Run from the package root: ``python3 tools/make_stationarity_fixture.py``.
statsmodels is needed only here, never by the library or the test suite.
"""
import json
import sys
import warnings
from pathlib import Path

from statsmodels.tsa.stattools import adfuller, kpss

ROOT = Path(__file__).resolve().parents[1]
sys.path.insert(0, str(ROOT / "tests"))
from stationarity_cases import CASES, make_series  # noqa: E402


def main():
    rows = []
    for case in CASES:
        x = make_series(case)
        adf = adfuller(x, regression="c", autolag="t-stat")
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")  # p-value outside the tabulated range
            k_stat, k_p, k_lags, _ = kpss(x, regression="c", nlags=int(4 * (x.size / 100) ** 0.25))
        adf_verdict = "stationary" if adf[1] < 0.05 else "unit_root"
        kpss_verdict = "stationary" if k_p > 0.05 else "non_stationary"
        rows.append({
            **case,
            "adf_stat": float(adf[0]), "adf_pvalue": float(adf[1]), "adf_lags": int(adf[2]),
            "kpss_stat": float(k_stat), "kpss_pvalue": float(k_p), "kpss_lags": int(k_lags),
            "adf_verdict": adf_verdict, "kpss_verdict": kpss_verdict,
        })
    out = ROOT / "tests" / "fixtures" / "stationarity_reference.json"
    out.write_text(json.dumps({"generator": "statsmodels adfuller(autolag='t-stat') and kpss(regression='c')", "cases": rows}, indent=1) + "\n")
    print(f"wrote {len(rows)} cases to {out}")


if __name__ == "__main__":
    main()
