import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).resolve().parent))

from stagepop import ModelParams, build_grid  # noqa: E402

ACCEPTANCE_LINES = []


def constants(r=1.0, s=1.0, a=1.0, b=1.0, c=0.0, e=1.0, f=1.0, g=0.0, d1=0.1, d2=0.1, period=1.0):
    return ModelParams(r=r, s=s, a=a, b=b, c=c, e=e, f=f, g=g, d1=d1, d2=d2, period=period)


@pytest.fixture
def grid16():
    return build_grid(1.0, 16)


@pytest.fixture
def grid64():
    return build_grid(1.0, 64)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
