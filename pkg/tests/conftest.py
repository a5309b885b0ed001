import os
import sys
from pathlib import Path

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, str(Path(__file__).parent))

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

FIXTURES = Path(__file__).parent / "fixtures"
DATA_DIR = Path(os.environ.get("RENEWCAST_DATA", Path(__file__).parents[1] / "data"))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def synthetic_table():
    from renewcast.ingest import SyntheticSpec, generate_synthetic

    return generate_synthetic(SyntheticSpec(n_rows=600, trend_slope=1e-4, noise_std=0.05, missing_rate=0.02, n_covariates=3, seed=3))


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(name): acceptance criterion reported in the terminal summary")
    config._acceptance = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None or not (rep.when == "call" or rep.skipped or rep.failed):
        return
    detail = "; ".join(str(v) for k, v in item.user_properties if k == "detail")
    if rep.skipped:
        status = "SKIP"
        detail = detail or (rep.longrepr[2] if isinstance(rep.longrepr, tuple) else "")
    else:
        status = "PASS" if rep.passed else "FAIL"
    results = item.config._acceptance.setdefault(marker.args[0], [])
    results.append((status, detail))


def pytest_terminal_summary(terminalreporter, config):
    results = getattr(config, "_acceptance", {})
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for name, outcomes in results.items():
        statuses = {s for s, _ in outcomes}
        status = "FAIL" if "FAIL" in statuses else "SKIP" if statuses == {"SKIP"} else "PASS"
        details = "; ".join(d for _, d in outcomes if d)
        terminalreporter.write_line(f"ACCEPTANCE {name}: {status}" + (f" ({details})" if details else ""))


@pytest.fixture
def detail(request):
    """Attach a human-readable measurement to the acceptance summary line."""

    def record(text):
        request.node.user_properties.append(("detail", text))
        print(f"{request.node.name}: {text}")

    return record
