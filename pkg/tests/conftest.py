import numpy as np
import pytest

from fredholm2d import generate_nodes, named_domain


@pytest.fixture(scope="session")
def square():
    return named_domain("unit_square")


@pytest.fixture(scope="session")
def disk():
    return named_domain("unit_disk")


@pytest.fixture(scope="session")
def square_nodes(square):
    return generate_nodes(square, 0.1, seed=0)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in mod.summary_lines():
        terminalreporter.write_line(line)
