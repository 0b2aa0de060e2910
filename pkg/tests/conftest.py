"""Per-criterion PASS/FAIL summary for tests marked ``acceptance``.

A criterion passes when every test carrying its id passed; the summary
lists criteria in id order at the end of the run.
"""

import pytest

_results: dict[str, dict] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None:
        return
    if report.when == "call" or (report.when == "setup" and not report.passed):
        cid, title = marker.args[0], marker.args[1] if len(marker.args) > 1 else ""
        entry = _results.setdefault(cid, {"title": title, "passed": [], "failed": []})
        if title and not entry["title"]:
            entry["title"] = title
        key = "passed" if report.passed else "failed"
        entry[key].append(item.name)


def pytest_terminal_summary(terminalreporter):
    if not _results:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for cid in sorted(_results, key=lambda c: int(c[1:]) if c[1:].isdigit() else c):
        r = _results[cid]
        status = "PASS" if r["passed"] and not r["failed"] else "FAIL"
        line = f"{cid} {status}: {r['title']} ({len(r['passed'])} passed, {len(r['failed'])} failed)"
        if r["failed"]:
            line += " -- failing: " + ", ".join(r["failed"])
        tr.write_line(line)
