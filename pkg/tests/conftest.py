"""Collects the one-line acceptance verdicts and prints them after the run."""

import pytest

_LINES: dict[int, str] = {}


@pytest.fixture
def verdict():
    def record(number: int, ok: bool, detail: str, assert_it: bool = True):
        line = f"ACCEPTANCE {number:2d}: {'PASS' if ok else 'FAIL'} | {detail}"
        _LINES[number] = line
        print(line)
        if assert_it:
            assert ok, line

    return record


def pytest_terminal_summary(terminalreporter):
    if _LINES:
        terminalreporter.section("acceptance criteria")
        for n in sorted(_LINES):
            terminalreporter.write_line(_LINES[n])
