"""Collects acceptance outcomes and prints one verdict line per criterion."""

import pytest

_VERDICTS = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        number = marker.args[0]
        title = marker.kwargs.get("title", item.name)
        detail = "; ".join(f"{k}={v}" for k, v in item.user_properties)
        passed = report.outcome == "passed"
        prev = _VERDICTS.get(number)
        if prev is not None:
            passed = passed and prev[1]
            detail = "; ".join(x for x in (prev[2], detail) if x)
        _VERDICTS[number] = (title, passed, detail)


def pytest_terminal_summary(terminalreporter):
    if not _VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_VERDICTS):
        title, passed, detail = _VERDICTS[number]
        line = f"criterion {number}: {'PASS' if passed else 'FAIL'}  {title}"
        if detail:
            line += f"  [{detail}]"
        terminalreporter.write_line(line)
