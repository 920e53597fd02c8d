"""Prints one ``criterion N: PASS/FAIL`` line per acceptance criterion at the end of the run."""

import re

_RESULTS = {}


def pytest_runtest_logreport(report):
    match = re.search(r"test_acceptance\.py::test_criterion_(\d+)", report.nodeid)
    if not match:
        return
    n = int(match.group(1))
    if report.when == "call" or report.failed:
        ok = report.passed and _RESULTS.get(n, True)
        _RESULTS[n] = ok


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_RESULTS):
        terminalreporter.write_line(f"criterion {n}: {'PASS' if _RESULTS[n] else 'FAIL'}")
