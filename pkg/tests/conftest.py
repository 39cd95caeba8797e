import numpy as np
import pytest

CRITERIA = []


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def criterion():
    """Record one acceptance line: criterion(number, name, passed, detail)."""

    def record(num, name, passed, detail=""):
        line = f"criterion {num:>2} {'PASS' if passed else 'FAIL'}  {name}  {detail}".rstrip()
        CRITERIA.append((num, line))
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(CRITERIA):
        terminalreporter.write_line(line)
