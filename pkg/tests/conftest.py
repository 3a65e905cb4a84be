import os

import pytest
from hypothesis import HealthCheck, settings

from landau_apriori.grid import VelocityGrid

settings.register_profile(
    "default",
    max_examples=40,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

# Acceptance verdicts are collected here and echoed in the terminal summary,
# so the pass/fail lines show up even when pytest captures stdout.
ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])


@pytest.fixture(scope="session")
def grid2_65():
    return VelocityGrid(2, 8.0, 65)


@pytest.fixture(scope="session")
def grid2_33():
    return VelocityGrid(2, 8.0, 33)
