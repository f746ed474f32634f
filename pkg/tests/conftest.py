"""Collects acceptance outcomes and prints one PASS/FAIL line per criterion."""

import pytest

_OUTCOMES: dict[int, list[tuple[str, bool]]] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    if report.when == "call" or (report.when == "setup" and not report.passed):
        _OUTCOMES.setdefault(int(marker.args[0]), []).append((item.name, report.passed))


def pytest_terminal_summary(terminalreporter):
    if not _OUTCOMES:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_OUTCOMES):
        checks = _OUTCOMES[number]
        passed = sum(ok for _, ok in checks)
        status = "PASS" if passed == len(checks) else "FAIL"
        failing = ", ".join(name for name, ok in checks if not ok)
        line = f"CRITERION {number:2d}: {status} ({passed}/{len(checks)} checks)"
        terminalreporter.write_line(line + (f" failing: {failing}" if failing else ""))
