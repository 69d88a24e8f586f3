import numpy as np
import pytest
from hypothesis import settings

from crnlearn.basis import BasisFunction, BasisKind, BasisLibrary
from crnlearn.likelihood import precompute
from crnlearn.scenarios import EXAMPLE1, EXAMPLE2
from crnlearn.ssa import Trajectory, TrajectorySet, identify_channels, simulate_many

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")

SEED = 11


def pytest_configure(config):
    config.acceptance_lines = {}


@pytest.fixture
def verdict(request):
    """Record one PASS/FAIL line for an acceptance criterion; returns the verdict."""

    def record(n: int, ok: bool, detail: str) -> bool:
        line = f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}"
        print(line)
        request.config.acceptance_lines[n] = line
        return ok

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = getattr(config, "acceptance_lines", {})
    if lines:
        terminalreporter.section("acceptance")
        for n in sorted(lines):
            terminalreporter.write_line(lines[n])


@pytest.fixture(scope="session")
def ex1_data():
    sc = EXAMPLE1
    ts = simulate_many(sc.network, sc.x0, sc.horizon, sc.n_trajectories, SEED)
    return ts, identify_channels(ts)


@pytest.fixture(scope="session")
def ex1_small():
    """Example-1 network, 20 short trajectories: cheap but non-trivial."""
    sc = EXAMPLE1
    ts = simulate_many(sc.network, sc.x0, 2.0, 20, 5)
    return ts, identify_channels(ts)


@pytest.fixture(scope="session")
def ex2_data():
    sc = EXAMPLE2
    ts = simulate_many(sc.network, sc.x0, sc.horizon, sc.n_trajectories, SEED)
    return ts, identify_channels(ts)


def toy_design(t0=1.0, t1=1.0):
    """y = (2) held t0, then (1) held t1; one channel v = (-1,), basis phi = x."""
    ts = TrajectorySet((Trajectory(np.array([[2], [1]]), np.array([t0, t1]), t0 + t1),))
    cs = identify_channels(ts)
    lib = BasisLibrary((BasisFunction(BasisKind.LINEAR, (0,)),), 1, 1)
    return precompute(ts, cs, lib)
