import numpy as np
import pytest

from rbmlab.model import RbmModel

ACCEPTANCE_LINES = []


@pytest.fixture
def tiny_model():
    return RbmModel.random(5, 3, 0.8, rng=11)


def record_acceptance(line: str) -> None:
    ACCEPTANCE_LINES.append(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def binary(rng, shape, p=0.5):
    return (rng.random(shape) < p).astype(np.uint8)
