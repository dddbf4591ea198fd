"""Collects acceptance outcomes and prints one pass/fail line per criterion."""

from __future__ import annotations

_RESULTS: dict[str, tuple[str, str]] = {}


def pytest_runtest_logreport(report):
    if "acceptance" not in report.keywords:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        props = dict(report.user_properties)
        label = props.get("criterion", report.nodeid.split("::")[-1])
        outcome = "PASS" if report.outcome == "passed" else "FAIL"
        _RESULTS[label] = (outcome, props.get("measured", ""))


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for label in sorted(_RESULTS):
        outcome, measured = _RESULTS[label]
        line = f"{outcome}  {label}"
        if measured:
            line += f"  [{measured}]"
        terminalreporter.write_line(line)
