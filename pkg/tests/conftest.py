import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "default", deadline=None, max_examples=25,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.function_scoped_fixture])
settings.load_profile("default")


@pytest.fixture
def grid1d():
    from levyschauder.field import GridSpec

    return GridSpec(1, 256)


def rel_err(a, b):
    a, b = np.asarray(a), np.asarray(b)
    return float(np.max(np.abs(a - b)) / max(np.max(np.abs(b)), 1e-300))


_CRITERIA = []


def pytest_runtest_logreport(report):
    if report.when == "call" and "test_acceptance.py::test_criterion_" in report.nodeid:
        detail = dict(report.user_properties).get("detail", "")
        _CRITERIA.append((report.nodeid.split("::")[-1], report.outcome, report.duration, detail))


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for name, outcome, dur, detail in sorted(_CRITERIA):
        num = int(name.split("_")[2])
        label = "PASS" if outcome == "passed" else "FAIL"
        terminalreporter.write_line(f"criterion {num:2d} {label} ({dur:6.1f}s) {name[18:]}: {detail}")
