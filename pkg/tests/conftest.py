"""Per-criterion pass/fail summary for tests marked ``criterion("ACn", "...")``.

A criterion passes only if every test carrying its marker ran and passed; an
xfail counts as a failure of the criterion.
"""
import re

import pytest

_CRITERIA = {}  # id -> [description, ok, ran]


def _key(cid):
    m = re.match(r"AC(\d+)", cid)
    return (int(m.group(1)) if m else 10 ** 6, cid)


def pytest_collection_finish(session):
    for item in session.items:  # after deselection
        for mark in item.iter_markers("criterion"):
            entry = _CRITERIA.setdefault(mark.args[0], ["", True, False])
            if len(mark.args) > 1 and not entry[0]:
                entry[0] = mark.args[1]


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    outcome.get_result().criteria = [m.args[0] for m in item.iter_markers("criterion")]


def pytest_runtest_logreport(report):
    for cid in getattr(report, "criteria", ()):
        entry = _CRITERIA[cid]
        if report.when == "call":
            entry[2] = True
        if report.failed or report.skipped:  # skipped covers xfail
            entry[1] = False


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for cid in sorted(_CRITERIA, key=_key):
        desc, ok, ran = _CRITERIA[cid]
        tr.write_line(f"{cid} {'PASS' if ok and ran else 'FAIL'}  {desc}")
