"""Shared fixtures and the per-criterion acceptance summary."""

from __future__ import annotations

import numpy as np
import pytest

from stefan_limits.model import PhysicalParams, make_grids

ACCEPTANCE: dict[int, tuple[str, bool, str]] = {}


def record_criterion(number: int, name: str, passed: bool, detail: str = "") -> None:
    """Store the outcome of an acceptance criterion for the terminal summary."""
    ACCEPTANCE[number] = (name, bool(passed), detail)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        name, passed, detail = ACCEPTANCE[number]
        tag = "PASS" if passed else "FAIL"
        terminalreporter.write_line(f"[{tag}] criterion {number}: {name} :: {detail}")


@pytest.fixture(scope="session")
def grids():
    """Default study grid: 8 tangential nodes, graded y on (0, 10], 64 time steps on (0, 1]."""
    return make_grids(N_x=8, Y_max=10.0, N_y=64, grading_ratio=1.05, T=1.0, N_t=64)


@pytest.fixture(scope="session")
def fine_grids():
    """FD comparison grid: y refined by 2 (same outer nodes), t refined by 4."""
    return make_grids(N_x=8, Y_max=10.0, N_y=128, grading_ratio=1.05 ** 0.5, T=1.0, N_t=256)


@pytest.fixture
def params():
    return PhysicalParams()


def rel_l2(a, b) -> float:
    return float(np.linalg.norm(np.asarray(a) - np.asarray(b)) / np.linalg.norm(b))
