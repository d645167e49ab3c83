import os

import numpy as np
import pytest

from scatter2d.scene import make_grid, make_setup

DATA = os.path.join(os.path.dirname(__file__), "data")
SCENARIOS = os.path.join(os.path.dirname(os.path.dirname(__file__)), "scenarios")

F0 = 300e6
# use the setup's own wavenumber so fields computed in tests match the package exactly
K0 = make_setup(F0, 1.0, 1, 1).wavenumber
LAM0 = 2 * np.pi / K0


def rel(a, b):
    a, b = np.asarray(a), np.asarray(b)
    return float(np.linalg.norm(a - b) / np.linalg.norm(b))


@pytest.fixture
def small_grid():
    return make_grid(LAM0, 12)


@pytest.fixture
def small_setup():
    return make_setup(F0, 3 * LAM0, 6, 10)


# acceptance criterion number -> "PASS/FAIL ..." line, filled by test_acceptance
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[n])
