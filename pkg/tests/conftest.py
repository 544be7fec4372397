"""Shared fixtures and the acceptance-criterion summary.

Tests marked ``@pytest.mark.criterion(number, title)`` are collected into a
one-line-per-criterion PASS/FAIL table printed at the end of the run. A test
can attach a short measurement with ``record_property("detail", ...)``.
"""

from pathlib import Path

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "overdet", deadline=None, max_examples=60,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("overdet")

_CRITERIA: dict[int, tuple[str, str, str]] = {}


DEFAULT_CONFIG = Path(__file__).resolve().parents[1] / "configs" / "default.yaml"


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def default_config() -> Path:
    return DEFAULT_CONFIG


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or report.when not in ("setup", "call"):
        return
    if report.when == "setup" and report.passed:
        return
    number, title = marker.args
    detail = "; ".join(str(v) for k, v in item.user_properties if k == "detail")
    if report.failed:
        detail = detail or str(call.excinfo.value).splitlines()[0] if call.excinfo else detail
    _CRITERIA[number] = ("PASS" if report.passed else "FAIL", title, detail)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        status, title, detail = _CRITERIA[number]
        line = f"[{status}] criterion {number:2d}: {title}"
        if detail:
            line += f" -- {detail}"
        terminalreporter.write_line(line)
