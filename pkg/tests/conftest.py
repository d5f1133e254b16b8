from pathlib import Path

import pytest

import kpa

DATA_DIR = Path(kpa.__file__).resolve().parent / "data"


@pytest.fixture(scope="session")
def data_dir() -> Path:
    return DATA_DIR


# Tests marked @pytest.mark.criterion(num, label) are release-gate checks;
# their verdicts are echoed in the terminal summary, one line each, so the
# gate's outcome is visible in any pytest run regardless of capture mode.
_CRITERION_RESULTS: list[tuple[int, str, bool]] = []


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    if report.when != "call":
        return
    marker = item.get_closest_marker("criterion")
    if marker:
        _CRITERION_RESULTS.append((marker.args[0], marker.args[1], report.passed))


def pytest_terminal_summary(terminalreporter):
    if not _CRITERION_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for num, label, passed in sorted(_CRITERION_RESULTS):
        verdict = "PASS" if passed else "FAIL"
        terminalreporter.write_line(f"{verdict} [{num}] {label}")
