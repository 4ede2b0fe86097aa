import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(__file__))

_ACCEPTANCE_KEY = pytest.StashKey[dict]()


def pytest_configure(config):
    config.stash[_ACCEPTANCE_KEY] = {}


@pytest.fixture
def acceptance(request):
    """Record one acceptance line: ``acceptance(number, passed, detail)``."""
    lines = request.config.stash[_ACCEPTANCE_KEY]

    def record(number, passed, detail):
        lines[number] = "criterion %2d: %s  %s" % (number, "PASS" if passed else "FAIL", detail)
        print(lines[number])
        return passed

    return record


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash[_ACCEPTANCE_KEY]
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(lines):
        terminalreporter.write_line(lines[number])
