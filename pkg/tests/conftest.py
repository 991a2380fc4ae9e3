import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from strainsis import Grid, ModelCoefficients, constant_coefficients  # noqa: E402


def hetero_coefficients(grid, gamma=1.0, amp=0.2):
    """Smooth perturbation of d = 1, rho = 1, beta = 2 (same field as the oracle script)."""
    x = grid.centers
    return ModelCoefficients(
        d=1.0 + amp * np.cos(np.pi * x),
        rho=1.0 + amp * np.cos(2 * np.pi * x),
        beta=2.0 * (1.0 + amp * np.outer(np.cos(np.pi * x), np.cos(np.pi * x))),
        gamma=np.full(grid.n_cells, float(gamma)),
    )


@pytest.fixture
def grid64():
    return Grid(64)


@pytest.fixture
def const_bilinear(grid64):
    return constant_coefficients(grid64, d=1.0, rho=1.0, beta=2.0, gamma=0.0)


@pytest.fixture
def const_quadratic(grid64):
    return constant_coefficients(grid64, d=1.0, rho=1.0, beta=2.0, gamma=1.0)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[k])
