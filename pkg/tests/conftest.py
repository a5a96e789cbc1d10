import numpy as np
import pytest

from rosochatius import SystemParams


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def params(n, k=None, omega=1.0):
    n = tuple(n)
    k = tuple(k) if k is not None else (0.0,) * len(n)
    return SystemParams(len(n), n, k, omega)


ACCEPTANCE_LINES = []


@pytest.fixture
def record():
    """Collect one verdict line per acceptance criterion, echoed in the terminal summary."""

    def _record(criterion, passed, detail):
        line = f"criterion {criterion}: {'PASS' if passed else 'FAIL'}  {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)

    return _record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
