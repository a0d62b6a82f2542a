import numpy as np
import pytest

from speed_diffusion.increments import build_profile
from speed_diffusion.schedule import ScheduleSpec, build_schedule


@pytest.fixture(scope="session")
def ddpm_table():
    """The DDPM linear schedule: T=1000, beta from 1e-4 to 0.02."""
    return build_schedule(ScheduleSpec("linear", 1000, 1e-4, 0.02))


@pytest.fixture(scope="session")
def ddpm_profile(ddpm_table):
    return build_profile(ddpm_table, r=10.0)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
