import numpy as np
import pytest

from scalesep.simgen import ScenarioConfig, generate

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def population_A40():
    """Scenario A, r=3, delta=0.05 at K=40; only the population matrices are used."""
    return generate(ScenarioConfig.from_scenario("A", combo=3, regime=1, n=5, K=40, seed=0))


def random_symmetric(rng, K, scale=1.0):
    A = rng.standard_normal((K, K)) * scale
    return (A + A.T) / 2
