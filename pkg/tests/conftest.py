import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))

import util


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """Echo one line per acceptance criterion after capture ends."""
    if util.ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in util.ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
