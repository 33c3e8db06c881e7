import numpy as np
import pytest

from spinlab.hamiltonian import load_system

# Filled by the acceptance suite, printed once at the end of the run.
CRITERIA: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(CRITERIA):
        terminalreporter.write_line(CRITERIA[k])


@pytest.fixture(scope="session")
def btp():
    return load_system("btp")


@pytest.fixture(scope="session")
def chloroform():
    return load_system("chloroform")


@pytest.fixture(scope="session")
def acrylonitrile():
    return load_system("acrylonitrile")


@pytest.fixture(scope="session")
def aspirin():
    return load_system("aspirin")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
