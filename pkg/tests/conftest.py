"""Shared test plumbing.

The acceptance tests register one human-readable pass/fail line each;
those lines are replayed in a dedicated terminal section after the run so
the verdict of every criterion is visible even for passing tests (whose
stdout pytest would otherwise swallow).
"""

import numpy as np
import pytest

_acceptance_lines: list[str] = []


def record_acceptance(line: str) -> None:
    _acceptance_lines.append(line)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if _acceptance_lines:
        terminalreporter.section("acceptance criteria")
        for line in _acceptance_lines:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    """Fresh deterministic generator, one per test."""
    return np.random.default_rng(20260822)
