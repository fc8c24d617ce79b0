from __future__ import annotations

import pytest

#: criterion number -> (label, passed, detail); filled by test_acceptance.py
ACCEPTANCE_LINES: dict[int, tuple[str, bool, str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: runs finite-difference solves taking several seconds")


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE_LINES):
        label, passed, detail = ACCEPTANCE_LINES[number]
        terminalreporter.write_line(f"criterion {number:2d} {'PASS' if passed else 'FAIL'}  {label}: {detail}")


@pytest.fixture(scope="session")
def acceptance_lines():
    return ACCEPTANCE_LINES
