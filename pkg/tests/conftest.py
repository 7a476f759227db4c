import sys

import pytest

# verdict lines appended by the acceptance tests; echoed after the run
# so they are visible without -s
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance verdicts")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def coarse_switch_interval():
    """Widen the interpreter's thread switch interval for contention tests.

    With the default 5 ms interval a GIL interpreter spends most of a
    contended-lock test on context switches instead of work; 50 ms keeps
    multi-million-section stress runs inside their time budgets without
    changing what is being tested.
    """
    old = sys.getswitchinterval()
    sys.setswitchinterval(0.05)
    yield
    sys.setswitchinterval(old)
