import os

import pytest
from hypothesis import HealthCheck, settings

from oracles import market
from xva import ClaimSpec

settings.register_profile("default", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("ci", max_examples=25, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture
def atm_call():
    return ClaimSpec.call(100.0, 1.0)


@pytest.fixture
def defxva():
    """Default-risk parameter set used across the closed-form, lattice and MC checks."""
    return market(r_f=0.08, r_c=0.01, alpha=0.25)



def pytest_terminal_summary(terminalreporter):
    from oracles import ACCEPTANCE_LINES

    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[n])
