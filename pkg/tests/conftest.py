import pytest

from optocool.molphys import load_molecule
from optocool.scheme import build_default_scheme

_ACCEPTANCE = []


def pytest_configure(config):
    config._acceptance_lines = _ACCEPTANCE


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for line in _ACCEPTANCE:
        terminalreporter.write_line(line)


@pytest.fixture
def acceptance():
    """Record one PASS/FAIL line per criterion and fail the test if it did not pass."""

    def report(number, name, ok, detail=""):
        line = f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {name} -- {detail}"
        _ACCEPTANCE.append(line)
        print(line)
        assert ok, line

    return report


@pytest.fixture(scope="session")
def cf3h():
    return load_molecule("CF3H")


@pytest.fixture(scope="session")
def scheme(cf3h):
    return build_default_scheme(cf3h)
