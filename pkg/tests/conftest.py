import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(__file__))

_ACCEPTANCE = {}


class _Recorder:
    def __call__(self, number, passed, detail):
        line = "[%s] criterion %2d: %s" % ("PASS" if passed else "FAIL", number, detail)
        _ACCEPTANCE[number] = line
        print(line)
        return passed


@pytest.fixture(scope="session")
def record():
    """Store the one-line verdict of an acceptance criterion for the summary."""
    return _Recorder()


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        terminalreporter.write_line(_ACCEPTANCE[number])
