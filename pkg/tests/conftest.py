"""Shared fixtures and small hand-built models used across the test suite."""

import numpy as np
import pytest

from handover.robot import bundled_model, load_model
from handover.simulation import bundled_scenario, run_scenario

# (criterion, passed, detail) rows appended by the acceptance tests and
# printed as one line each in the terminal summary.
ACCEPTANCE_RESULTS = []

# wall-clock seconds of each bundled scenario run, keyed by name
SCENARIO_WALL = {}


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in ACCEPTANCE_RESULTS:
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")


@pytest.fixture(scope="session")
def acceptance_report():
    return ACCEPTANCE_RESULTS


@pytest.fixture(scope="session")
def scenario_wall_times():
    return SCENARIO_WALL


def _timed_run(name):
    import time

    t0 = time.perf_counter()
    rl = run_scenario(bundled_scenario(name))
    SCENARIO_WALL[name] = time.perf_counter() - t0
    return rl


@pytest.fixture(scope="session")
def s1_run():
    return _timed_run("s1")


@pytest.fixture(scope="session")
def s2_run():
    return _timed_run("s2")


@pytest.fixture(scope="session")
def s3_run():
    return _timed_run("s3")


@pytest.fixture(scope="session")
def s4_run():
    return _timed_run("s4")

POINT_INERTIA = [1e-12, 0, 0, 0, 1e-12, 0, 0, 0, 1e-12]
WIDE_LIMITS = {"q_min": -10.0, "q_max": 10.0, "v_max": 100.0,
               "a_max": 1000.0, "tau_max": 1000.0}


@pytest.fixture(scope="session")
def panda():
    return bundled_model()


def pendulum_model(mass=1.3, length=0.7, limits=None):
    """Point mass on a massless rod, rotating about world y; q=0 hangs down."""
    return load_model({
        "name": "pendulum",
        "gravity": [0.0, 0.0, -9.81],
        "joints": [{
            "axis": [0.0, 1.0, 0.0],
            "origin": {"translation": [0, 0, 0], "rotation": [1, 0, 0, 0]},
            "limits": dict(WIDE_LIMITS, **(limits or {})),
            "link": {"mass": mass, "com": [0.0, 0.0, -length],
                     "inertia": POINT_INERTIA},
        }],
        "end_effector": {"translation": [0.0, 0.0, -length],
                         "rotation": [1, 0, 0, 0]},
    })


def planar_model(*lengths, masses=None):
    """Planar chain in the xy-plane, all joints about world z."""
    joints = []
    prev = 0.0
    for i, L in enumerate(lengths):
        mass = 1.0 if masses is None else masses[i]
        joints.append({
            "axis": [0.0, 0.0, 1.0],
            "origin": {"translation": [prev, 0.0, 0.0], "rotation": [1, 0, 0, 0]},
            "limits": dict(WIDE_LIMITS),
            "link": {"mass": mass, "com": [L / 2.0, 0.0, 0.0],
                     "inertia": POINT_INERTIA},
        })
        prev = L
    return load_model({
        "name": f"planar{len(lengths)}",
        "gravity": [0.0, 0.0, -9.81],
        "joints": joints,
        "end_effector": {"translation": [lengths[-1], 0.0, 0.0],
                         "rotation": [1, 0, 0, 0]},
    })


def random_configurations(model, count, rng, margin=0.0):
    """Uniform samples inside the joint position limits."""
    q_min, q_max, *_ = model.limit_arrays()
    span = q_max - q_min
    return q_min + margin * span + rng.uniform(0.0, 1.0, (count, model.n)) * (1 - 2 * margin) * span
