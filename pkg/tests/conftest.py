import numpy as np
import pytest

from svexposure.patterns import LevelSet
from svexposure.sensor import SensorConfig


@pytest.fixture
def config():
    return SensorConfig()


@pytest.fixture
def levels():
    return LevelSet.default()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    from acceptance_log import RESULTS

    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
