import numpy as np
import pytest

from satguard.config import load_config
from satguard.model import LinearInternalDynamics, UncertaintyEnvelope
from satguard.tuning import EnvelopeConstants

A_G = np.array([[-3.4, -1.0, -0.5], [0.25, -1.7, 0.5], [1.2, 2.75, -3.6]])
B1_G = np.array([[0.1], [0.0], [0.0]])
B2_G = np.array([[0.0], [0.2], [0.0]])
C_G = np.array([[1.0, 0.0, 1.0]])


@pytest.fixture
def golden_dynamics():
    return LinearInternalDynamics(A_G, B1_G, B2_G, C_G)


@pytest.fixture
def golden_envelope():
    return UncertaintyEnvelope(-1.0, 3.0, 0.5, 1.5, 0.1, 0.3, 0.05, 0.1, 10.0)


@pytest.fixture
def reference_constants():
    return EnvelopeConstants(0.05, 0.07, 0.2, 0.42, source="declared")


@pytest.fixture(scope="session")
def golden_scenario():
    return load_config("golden")


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
