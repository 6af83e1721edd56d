"""Shared pytest wiring.

Echoes the acceptance verdict lines in the terminal summary so they stay
visible even when output capture hides per-test prints.
"""

import sys


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "VERDICTS", []) if mod else []
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
