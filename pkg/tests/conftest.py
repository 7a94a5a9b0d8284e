import pytest

from flexmatch.core import MICRO, LoadSpec, MarketParams, realization_from_loads

C = 13 * MICRO


@pytest.fixture
def c():
    return C


@pytest.fixture
def two_step():
    """T=2, S=[1, 0]; L1 is patient, L2 is due immediately."""
    params = MarketParams(c=C, T=2)
    loads = [LoadSpec(1, a=1, d=2, b=1 * MICRO), LoadSpec(2, a=1, d=1, b=2 * MICRO)]
    return realization_from_loads(params, loads, [1, 0])


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
