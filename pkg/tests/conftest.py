import os

import pytest

_CRITERIA = []


@pytest.fixture
def record_criterion():
    """Register one acceptance line: ``record_criterion(number, passed, detail)``."""
    def _record(number, passed, detail):
        _CRITERIA.append((number, bool(passed), detail))
    return _record


def pytest_collection_modifyitems(config, items):
    if os.environ.get("MRCT_LONG") == "1":
        return
    skip = pytest.mark.skip(reason="long mode: set MRCT_LONG=1")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number, passed, detail in sorted(_CRITERIA, key=lambda c: c[0]):
        status = "PASS" if passed else "FAIL"
        terminalreporter.write_line(f"criterion {number:>2}: {status}  {detail}")
