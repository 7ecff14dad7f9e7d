import re

import pytest

_ACCEPTANCE = {}
_NOTES = {}


def pytest_runtest_logreport(report):
    if "test_acceptance.py" not in report.nodeid:
        return
    m = re.search(r"test_criterion_(\d+)", report.nodeid)
    if not m:
        return
    key = int(m.group(1))
    failed = report.failed
    if report.when == "call" or failed:
        prev = _ACCEPTANCE.get(key, (report.nodeid.split("::")[-1], "PASS"))
        status = "FAIL" if failed or prev[1] == "FAIL" else ("SKIP" if report.skipped else "PASS")
        _ACCEPTANCE[key] = (prev[0], status)


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(_ACCEPTANCE):
        name, status = _ACCEPTANCE[key]
        terminalreporter.write_line(f"criterion {key:2d}: {status}  ({name})")
        for line in _NOTES.get(key, ()):
            terminalreporter.write_line(f"    {line}")


@pytest.fixture
def note(request):
    """Attach a detail line to an acceptance criterion's summary entry."""
    m = re.search(r"test_criterion_(\d+)", request.node.name)
    lines = _NOTES.setdefault(int(m.group(1)) if m else -1, [])
    lines.clear()

    def add(text):
        lines.append(str(text))
        print(text)

    return add


@pytest.fixture
def rng():
    import numpy as np

    return np.random.default_rng(20240601)
