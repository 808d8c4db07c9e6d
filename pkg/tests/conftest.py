import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(__file__))

# criterion id -> (status, detail), filled by tests/test_acceptance.py
ACCEPTANCE = {}


@pytest.fixture
def record():
    """Store one acceptance line; ``status`` is PASS, FAIL or REPORT."""

    def _record(cid, ok, detail, report_only=False):
        status = "REPORT" if report_only else ("PASS" if ok else "FAIL")
        ACCEPTANCE[cid] = (status, detail)
        print(f"[{status}] {cid}: {detail}")
        return ok

    return _record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for cid in sorted(ACCEPTANCE, key=lambda c: int(c[2:])):
        status, detail = ACCEPTANCE[cid]
        terminalreporter.write_line(f"{status:6s} {cid}: {detail}")
