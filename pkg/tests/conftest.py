import numpy as np
import pytest

from riskfilt import example4 as ex

ACCEPTANCE_LINES = []


def record(criterion: int, ok: bool, detail: str):
    """Log one acceptance line and fail the test if ``ok`` is false."""
    line = f"[criterion {criterion:2d}] {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def ex4_2000():
    return ex.example_model(1.0, 2000)


@pytest.fixture(scope="session")
def ex4_1000():
    return ex.example_model(1.0, 1000)


@pytest.fixture(scope="session")
def singular_1000():
    return ex.example_model(1.0, 1000, ex.SINGULAR_LAMBDA)


@pytest.fixture
def rng():
    return np.random.default_rng(20240917)


def brownian_increments(rng, grid, paths=None):
    shape = (grid.N,) if paths is None else (paths, grid.N)
    return rng.normal(0.0, np.sqrt(grid.dt), shape)
