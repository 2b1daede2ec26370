import os

import numpy as np
import pytest

from rydmirror.pairpot import default_dataset
from rydmirror.units import TransitionParams

os.environ.setdefault("NUMBA_CACHE_DIR", "/tmp/numba-cache")


@pytest.fixture
def tr():
    return TransitionParams()


@pytest.fixture
def dataset():
    return default_dataset()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
