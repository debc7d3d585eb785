import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from aosrl.config import EnvConfig
from aosrl.tabular import TabularMdp

settings.register_profile("repo", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("repo")


@pytest.fixture(scope="session")
def env_cfg():
    return EnvConfig()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def toy_mdp(gamma: float = 0.9) -> TabularMdp:
    """Three states, two actions.  Optimal greedy policy is (1, 1, 0); every
    state keeps a sizeable visit rate under it."""
    P = np.zeros((3, 2, 3))
    P[0, 0] = [0.8, 0.2, 0.0]
    P[0, 1] = [0.1, 0.45, 0.45]
    P[1, 0] = [0.5, 0.5, 0.0]
    P[1, 1] = [0.3, 0.2, 0.5]
    P[2, 0] = [0.2, 0.4, 0.4]
    P[2, 1] = [0.6, 0.4, 0.0]
    u = np.array([[0.2, 0.6], [0.3, 0.5], [1.0, 0.2]])
    return TabularMdp(P, u, gamma)


def optimal_value(mdp: TabularMdp, iters: int = 5000):
    V = np.zeros(mdp.S)
    for _ in range(iters):
        Q = (1 - mdp.gamma) * mdp.u + mdp.gamma * mdp.kernel @ V
        V = Q.max(axis=1)
    return V, Q


ACCEPTANCE_LINES: dict[int, str] = {}


@pytest.fixture
def report_criterion():
    """Record one PASS/FAIL line per acceptance criterion for the terminal summary."""
    def record(number: int, ok: bool, detail: str) -> bool:
        line = f"{'PASS' if ok else 'FAIL'} criterion {number}: {detail}"
        ACCEPTANCE_LINES[number] = line
        print(line)
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[n])
