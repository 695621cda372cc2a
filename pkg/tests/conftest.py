"""Registry for the numbered end-to-end gate checks.

Each gate test records its verdict here; after the run the terminal summary
prints one PASS/FAIL line per criterion so the gate can be read at a glance
without scanning individual test ids.
"""

import pytest

_RESULTS: dict[int, tuple[bool, str]] = {}


def record_criterion(number: int, passed: bool, detail: str) -> bool:
    _RESULTS[number] = (bool(passed), detail)
    return bool(passed)


@pytest.fixture
def record():
    return record_criterion


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_RESULTS):
        passed, detail = _RESULTS[number]
        word = "PASS" if passed else "FAIL"
        terminalreporter.write_line(f"criterion {number}: {word} - {detail}")
