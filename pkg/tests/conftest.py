import numpy as np
import pytest
from hypothesis import settings

from wavespec.geometry import build_model
from wavespec.green import assemble

settings.register_profile("default", max_examples=30, deadline=None)
settings.load_profile("default")


@pytest.fixture(scope="session")
def int4():
    """The h = 0.2 interval: interior nodes 0.2, 0.4, 0.6, 0.8."""
    return build_model("interval", h=0.2)


@pytest.fixture(scope="session")
def gs4(int4):
    return assemble(int4)


@pytest.fixture(scope="session")
def int41():
    return build_model("interval", n_interior=41)


@pytest.fixture(scope="session")
def star_unequal():
    return build_model("star", legs=(0.3, 0.5, 0.7), h=0.1)


@pytest.fixture(scope="session")
def star_equal():
    return build_model("star", legs=(0.4, 0.4, 0.4), h=0.1)


@pytest.fixture(scope="session")
def polar():
    return build_model("polar_disk", n_rings=8, n_sectors=16)


@pytest.fixture(scope="session")
def grid():
    return build_model("grid_domain", shape="disk", n=17)


@pytest.fixture
def rng():
    return np.random.default_rng(20261014)


def pytest_terminal_summary(terminalreporter):
    import sys
    results = getattr(sys.modules.get("test_acceptance"), "RESULTS", {})
    if results:
        terminalreporter.section("acceptance criteria")
        for k in sorted(results):
            terminalreporter.write_line(results[k])
