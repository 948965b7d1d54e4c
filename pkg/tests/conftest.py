import numpy as np
import pytest

from sinhgordon.jets import CauchyData
from sinhgordon.laxflow import seed_loop


@pytest.fixture
def rng():
    return np.random.default_rng(20261017)


@pytest.fixture(scope="session")
def genus_one():
    """Stationary genus-1 seed with closed-form spectral data."""
    return seed_loop(1, r=1.3, alpha=0.4)


@pytest.fixture(scope="session")
def genus_two():
    return seed_loop(2, r=1.2, alpha=0.3 + 0.2j, beta=0.5 - 0.1j)


@pytest.fixture(scope="session")
def smooth_data():
    return CauchyData.random(np.random.default_rng(7), N=128, n_modes=2, amp=0.2)


ACCEPTANCE_LINES = []


@pytest.fixture
def acceptance():
    """Record one PASS/FAIL line per criterion; the lines are echoed in the terminal summary."""
    def report(k, ok, detail):
        line = "criterion %2d: %s  %s" % (k, "PASS" if ok else "FAIL", detail)
        ACCEPTANCE_LINES.append(line)
        print(line)
        assert ok, line
    return report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
