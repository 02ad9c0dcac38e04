"""Per-criterion pass/fail lines for the acceptance suite."""

import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))

_results: dict[int, dict] = {}


def pytest_collection_modifyitems(items):
    for item in items:
        mark = item.get_closest_marker("criterion")
        if mark:
            number, title = mark.args
            entry = _results.setdefault(number, {"title": title, "outcomes": {}})
            entry["outcomes"][item.nodeid] = "not run"


def pytest_runtest_logreport(report):
    for entry in _results.values():
        if report.nodeid not in entry["outcomes"]:
            continue
        if report.when == "call" or report.outcome != "passed":
            # a setup failure or skip must not be overwritten by a later phase
            if entry["outcomes"][report.nodeid] in ("not run", "passed"):
                entry["outcomes"][report.nodeid] = report.outcome


def pytest_terminal_summary(terminalreporter):
    if not _results:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for number in sorted(_results):
        entry = _results[number]
        outcomes = entry["outcomes"]
        values = set(outcomes.values())
        if "failed" in values:
            status = "FAIL"
        elif values == {"skipped"}:
            status = "SKIP"
        elif values <= {"passed", "skipped"}:
            status = "PASS"
        else:
            status = "INCOMPLETE"
        tr.write_line(f"criterion {number}: {status}  {entry['title']}")
        for nodeid, outcome in outcomes.items():
            if outcome != "passed":
                tr.write_line(f"    {outcome}: {nodeid.split('::')[-1]}")
