"""Registry mirroring the primary suite's gate summary for the checks that
live in this package."""

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
