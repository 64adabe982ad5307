"""Shared pytest plumbing: surface the acceptance-criterion lines.

Capture normally hides per-test prints; the acceptance gate registers one
pass/fail line per criterion here and we echo them after the run.
"""

acceptance_lines = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if acceptance_lines:
        terminalreporter.section("acceptance criteria")
        for line in acceptance_lines:
            terminalreporter.write_line(line)
