import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from snapmatch.dynamics import TimeGrid
from snapmatch.kernels import KernelConfig
from snapmatch.problem import SnapshotProblem

settings.register_profile(
    "default", deadline=None, max_examples=40,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_problem(rng, n=3, m=4, n_steps=2, sigma_v=1.0, sigma_d=0.9, lam=2.0, rho=0.3,
                   frozen_u=False, times=None):
    x0 = rng.normal(size=(n, 3))
    targets = [rng.normal(size=(m, 3)) for _ in range(n_steps)]
    if times is None:
        times = np.concatenate([[0.0], np.cumsum(rng.uniform(0.3, 0.8, size=n_steps))])
    return SnapshotProblem(x0, targets, TimeGrid(times), KernelConfig(sigma_v, sigma_d),
                           lam, rho, frozen_u)


@pytest.fixture
def small_problem(rng):
    return random_problem(rng)
