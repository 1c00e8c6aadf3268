import math

import numpy as np
import pytest

from corrport.model import MarketParams, TimeGrid, derive_constants, baseline_grid, baseline_params

ACCEPTANCE_LINES = []


def record(criterion, passed, detail):
    ACCEPTANCE_LINES.append(f"[{'PASS' if passed else 'FAIL'}] {criterion}: {detail}")
    return passed


@pytest.fixture
def report():
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def params():
    return baseline_params()


@pytest.fixture
def grid2():
    return baseline_grid(2)


def random_params(rng, n_max=4, k_range=0.1):
    """Random admissible (params, grid); delta is drawn below the N-step bound."""
    while True:
        a31 = rng.uniform(0.1, 0.9)
        a32 = rng.uniform(0.05, 0.99 * math.sqrt(1 - a31**2))
        sigma1 = rng.uniform(0.05, 0.5)
        h = float(rng.choice([0.25, 0.5, 1.0]))
        grid = TimeGrid(n_steps=int(rng.integers(1, n_max + 1)), h=h)
        base = MarketParams(
            mu1=rng.uniform(-0.8, 0.8) * sigma1 / math.sqrt(h),
            sigma1=sigma1,
            mu2=rng.uniform(0.0, 0.1),
            sigma2=rng.uniform(0.01, 0.3),
            k=rng.uniform(-k_range, k_range),
            mu3=rng.uniform(-0.05, 0.1),
            sigma3=rng.uniform(0.05, 0.4),
            a31=a31,
            a32=a32,
            gamma=rng.uniform(0.1, 3.0),
            delta=0.5,
        )
        try:
            dc = derive_constants(base, grid)
        except ValueError:
            continue
        if dc.m_diff <= 0:
            continue
        delta = rng.uniform(0.02, 0.95) * min(dc.admissibility_bound(), 0.99)
        return base.replace(delta=delta), grid


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
