import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from isingcoex.lattice import Box, Region, build_region, tri_times_z

settings.register_profile(
    "default", deadline=None, max_examples=60, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


@pytest.fixture
def kind():
    return tri_times_z()


@pytest.fixture
def b1(kind):
    return build_region(kind, Box((0, 0, 0), 1))


@pytest.fixture
def patch(kind):
    """B_1 cut to layer 0: the 3x3 triangular patch."""
    return Region.from_sites(kind, [s for s in Box((0, 0, 0), 1).points(kind) if s[2] == 0])


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    if mod is not None and mod.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(mod.RESULTS, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
