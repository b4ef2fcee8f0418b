import numpy as np
import pytest

from chemospread.model import GridSpec, InitialData, ModelParams, sample_initial


@pytest.fixture
def small_grid():
    return GridSpec(L=4.0, M=80, T=2.0, dt=0.002)


@pytest.fixture
def bump_state():
    def make(grid):
        return sample_initial(InitialData.bump(), grid)
    return make


def random_profiles(rng, n, vmax=1.0):
    u = rng.uniform(0.0, 1.0, n + 1)
    v = rng.uniform(0.0, vmax, n + 1)
    u[0] = u[-1] = 0.0
    v[0], v[-1] = v[1], v[-2]
    return u, v


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


DEFAULT = ModelParams()


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
