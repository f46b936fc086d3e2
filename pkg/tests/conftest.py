import warnings

import numpy as np
import pytest

from biflab.family import branner_hubbard, quadratic
from biflab.misiurewicz import MisiurewiczConstraint as MC
from biflab.misiurewicz import solve_misiurewicz
from biflab import renorm

# rank-2 cubic certificate used across modules: c_0 lands on a fixed point
# after 3 steps, c_1 on a 3-cycle after 1 step
BH_SEED = np.array([-0.69054526 - 0.29586821j, -0.00381151 + 1.33251206j])
BH_CONSTRAINTS = (MC(0, 3, 1), MC(1, 1, 3))


@pytest.fixture(scope="session")
def quad():
    return quadratic()


@pytest.fixture(scope="session")
def bh3():
    return branner_hubbard(3)


@pytest.fixture(scope="session")
def cert_m2(quad):
    return solve_misiurewicz(quad, [MC(0, 2, 1)], [-1.9])


@pytest.fixture(scope="session")
def bh_cert(bh3):
    return solve_misiurewicz(bh3, BH_CONSTRAINTS, BH_SEED)


@pytest.fixture(scope="session")
def quad_window(quad, cert_m2):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", renorm.WindowTooDistorted)
        return renorm.find_renorm_window(quad, cert_m2, 0, renorm.WindowSearch(seed=-1.77, radius=0.1))


@pytest.fixture(scope="session")
def bh_windows(bh3, bh_cert):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", renorm.WindowTooDistorted)
        return [renorm.find_renorm_window(bh3, bh_cert, i, renorm.WindowSearch(radius=0.05)) for i in (0, 1)]


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
