import math

import pytest
from hypothesis import settings

from stieltjes import scenarios
from stieltjes.derivator import ContinuousPiece, Derivator, JumpList, Linear, Plateau, PeriodicJumps, Smooth

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")


def naturals():
    """g(t) = t plus a unit jump at every positive integer."""
    return Derivator.unit_jumps()


def cyano():
    return scenarios.build_derivator(scenarios.load_scenario("cyanobacteria"))


def mixed():
    """Linear, smooth, plateau and linear pieces with listed jumps, two of them on boundaries."""
    pieces = [
        ContinuousPiece(0.0, 1.0, Linear(2.0)),
        ContinuousPiece(1.0, 2.0, Smooth.from_exprs("t^3/3", "t^2")),
        ContinuousPiece(2.0, 3.0, Plateau()),
        ContinuousPiece(3.0, math.inf, Linear(0.5)),
    ]
    return Derivator(pieces, JumpList(((0.5, 0.25), (2.0, 1.0), (2.5, 0.5), (4.0, 2.0))))


@pytest.fixture
def nat():
    return naturals()


@pytest.fixture
def cyano_g():
    return cyano()


@pytest.fixture
def mixed_g():
    return mixed()


ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])
