from pathlib import Path

import numpy as np
import pytest

DATA = Path(__file__).parent / "data"

_acceptance_lines: list[str] = []


def record_acceptance(line: str) -> None:
    _acceptance_lines.append(line)


def pytest_terminal_summary(terminalreporter):
    if _acceptance_lines:
        terminalreporter.section("acceptance criteria")
        for line in _acceptance_lines:
            terminalreporter.write_line(line)


@pytest.fixture
def diabetes_path():
    return DATA / "diabetes.csv"


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def small_csv(tmp_path):
    path = tmp_path / "small.csv"
    path.write_text("x,color,size,label\n1.5,red,3,A\n2.0,blue,4,B\n-1,red,5,A\n4,green,6,B\n")
    return path
