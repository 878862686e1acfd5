import numpy as np
import pytest

from epiabc.model import ModelParams
from epiabc.synthetic import italy_like_series, synthetic_series

_criteria = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    number, title = marker.args
    if report.when == "call" or (report.when == "setup" and not report.passed):
        status = "PASS" if report.passed else ("SKIP" if report.skipped else "FAIL")
        _criteria[number] = (status, title)


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_criteria):
        status, title = _criteria[number]
        terminalreporter.write_line(f"[{status}] criterion {number}: {title}")


SMALL_TRUE_PARAMS = ModelParams(0.2, 5.0, 0.5, 0.05, 0.3, 0.01, 0.5, 0.8)


@pytest.fixture(scope="session")
def small_series():
    """14-day synthetic series, small enough for the scalar oracle."""
    return synthetic_series(SMALL_TRUE_PARAMS, (120.0, 5.0, 1.0), 200_000.0, 14, seed=7,
                            country="Smallville")


@pytest.fixture(scope="session")
def italy_like():
    return italy_like_series()


@pytest.fixture
def rng_np():
    return np.random.default_rng(20201)
