import pytest

# PASS/FAIL lines from the acceptance suite, repeated in the terminal summary
CRITERIA_LINES = []


def pytest_terminal_summary(terminalreporter):
    if CRITERIA_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(CRITERIA_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
