import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from ripple_entropy.config import ExperimentConfig
from ripple_entropy.experiments import Store
from ripple_entropy.phasespace import basis_for_grid
from ripple_entropy.spectral import build_geometry

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.function_scoped_fixture])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def cfg():
    return ExperimentConfig()


@pytest.fixture(scope="session")
def store():
    """Shared on-disk cache; honours RIPPLE_ENTROPY_CACHE."""
    return Store()


@pytest.fixture(scope="session")
def geom055():
    return build_geometry(5.5, 0.55)


@pytest.fixture(scope="session")
def basis055(geom055):
    return basis_for_grid(geom055.grid)


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(12345)
