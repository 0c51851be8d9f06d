import pytest

from olgins.core import example1, three_state
from olgins.ergodic import atom_chain
from olgins.planner import solve


@pytest.fixture(scope="session")
def ex1():
    return example1()


@pytest.fixture(scope="session")
def ex1_sol(ex1):
    return solve(ex1)


@pytest.fixture(scope="session")
def ex1_chain(ex1_sol):
    return atom_chain(ex1_sol)


@pytest.fixture(scope="session")
def three():
    return three_state()


@pytest.fixture(scope="session")
def three_sol(three):
    return solve(three)


@pytest.fixture(scope="session")
def three_chain(three_sol):
    return atom_chain(three_sol)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[n])
