import numpy as np
import pytest

from artifact.kinetic_core import maxwellian

_ACCEPTANCE = []


@pytest.fixture
def acceptance_log():
    def log(criterion, passed, detail):
        line = f"criterion {criterion:>2}: {'PASS' if passed else 'FAIL'}  {detail}"
        _ACCEPTANCE.append(line)
        print(line)
    return log


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)


def smooth_random(grid, m, rng, n=1.0):
    """Positive smooth velocity profile: a drifting Maxwellian times a bounded modulation."""
    u = rng.normal(0, 0.3, 3)
    T = 1 + 0.2 * rng.random()
    M = maxwellian(grid, n, u, T, m, tail_tol=None)
    k = rng.normal(0, 0.6, (3, 3))
    ph = rng.random(3) * 2 * np.pi
    mod = 1 + 0.25 * sum(np.sin(grid.nodes @ k[i] + ph[i]) for i in range(3)) / 3
    return M * mod
