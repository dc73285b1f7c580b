import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))

import pytest

_criteria: dict[int, bool] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    report = (yield).get_result()
    mark = item.get_closest_marker("acceptance")
    if mark is None:
        return
    number = mark.args[0]
    if report.when == "call":
        _criteria[number] = _criteria.get(number, True) and report.passed
    elif report.failed:
        _criteria[number] = False


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_criteria):
        terminalreporter.write_line(f"criterion {number}: {'PASS' if _criteria[number] else 'FAIL'}")
