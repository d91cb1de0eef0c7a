import numpy as np
import pytest

from slipstokes.cases import cavity_mesh


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def cavity8():
    return cavity_mesh(8)


def pytest_terminal_summary(terminalreporter):
    import sys
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in mod.summary_lines():
        terminalreporter.write_line(line)
