from __future__ import annotations

import numpy as np
import pytest

from ssggm import _backend


def random_pd(k, rng, ridge=None):
    A = rng.standard_normal((k, k + 3))
    A = A @ A.T
    return A + (k if ridge is None else ridge) * np.eye(k)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


backends = pytest.mark.parametrize("backend", _backend.available())


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def acceptance_report():
    """Record one PASS/FAIL line per criterion; printed after the run."""

    def record(number, ok, detail):
        line = f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
