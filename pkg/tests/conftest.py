import math

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from bubblelab.profile import WarpedGeometry, make_builtin_profile, profile_from_functions

settings.register_profile("bubblelab", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("bubblelab")


def ex1_f(s):
    return 1.0 / np.cos(np.asarray(s) / 2) ** 2


def ex2_f(s):
    return (1.0 - np.asarray(s) ** 2) ** -1.5


@pytest.fixture(scope="session")
def ex1():
    return WarpedGeometry(make_builtin_profile("ex1"), 1.0)


@pytest.fixture(scope="session")
def ex2():
    return WarpedGeometry(make_builtin_profile("ex2"), 1.0)


@pytest.fixture(scope="session")
def flat():
    """phi = s, so f is identically 1 (a flat cylinder)."""
    p = profile_from_functions(lambda s: np.asarray(s, dtype=float),
                               lambda s: np.ones_like(np.asarray(s, dtype=float)),
                               lambda s: np.zeros_like(np.asarray(s, dtype=float)),
                               s_max=1.5, name="flat")
    return WarpedGeometry(p, 1.0)


# one line per acceptance criterion, repeated at the end of the pytest run
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
