"""Shared pytest plumbing.

The acceptance tests record one checklist line each; printing them from
this hook keeps them visible after stdout capture is torn down.
"""

CHECKLIST: list[str] = []


def pytest_terminal_summary(terminalreporter, exitstatus):
    if CHECKLIST:
        terminalreporter.section("acceptance checklist")
        for line in CHECKLIST:
            terminalreporter.write_line(line)
