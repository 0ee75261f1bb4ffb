"""Collects one PASS/FAIL line per acceptance criterion and prints them
after the test session."""

import pytest

ACCEPTANCE_LINES: dict = {}


@pytest.fixture
def record_criterion():
    def record(number: int, title: str, passed: bool, detail: str) -> str:
        line = f"[{'PASS' if passed else 'FAIL'}] criterion {number:>2} ({title}): {detail}"
        ACCEPTANCE_LINES[number] = line
        print(line)
        return line
    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[number])
