import logging

import numpy as np
import pytest

from conftest import pendulum_model, planar_model
from handover.constraints import (
    CollisionParams,
    LinkSphere,
    Sphere,
    acceleration_bounds,
    collision_constraint,
    joint_limit_constraints,
)
from handover.qp import ConstraintSet, DecisionLayout, TaskBlock, solve_qp
from handover.robot import (
    jacobian,
    link_point,
    mass_matrix,
    nonlinear_terms,
    point_jacobian,
)


# ------------------------------------------------------- acceleration bounds

def test_bounds_at_rest_midrange_are_pure_acceleration_limits():
    m = pendulum_model(limits={"q_min": -1.0, "q_max": 1.0, "v_max": 2.0,
                               "a_max": 5.0})
    lo, hi = acceleration_bounds(m, [0.0], [0.0], 1e-3)
    np.testing.assert_array_equal(lo, [-5.0])
    np.testing.assert_array_equal(hi, [5.0])


def test_bounds_at_velocity_limit_forbid_speeding_up():
    m = pendulum_model(limits={"q_min": -5.0, "q_max": 5.0, "v_max": 2.0,
                               "a_max": 50.0})
    lo, hi = acceleration_bounds(m, [0.0], [2.0], 1e-3)
    assert hi[0] == 0.0          # (v_max - v)/dt with v exactly at the limit
    assert lo[0] == -50.0
    lo, hi = acceleration_bounds(m, [0.0], [-2.0], 1e-3)
    assert lo[0] == 0.0


def test_apex_refinement_engages_near_the_wall():
    # close to q_max and still closing: horizon apex lies inside the window,
    # so the bound must be the exact stop-at-the-limit deceleration
    m = pendulum_model(limits={"q_min": -5.0, "q_max": 1.0, "v_max": 2.0,
                               "a_max": 1000.0})
    q, qd, T = 0.999, 0.5, 0.1
    hA = 2.0 * (1.0 - q - qd * T) / T**2
    assert hA < -qd / T          # the endpoint bound alone would under-brake
    lo, hi = acceleration_bounds(m, [q], [qd], 1e-3, horizon=T)
    assert hi[0] == -(qd**2) / (2.0 * (1.0 - q))


def test_endpoint_bound_used_when_apex_beyond_horizon():
    m = pendulum_model(limits={"q_min": -5.0, "q_max": 1.0, "v_max": 2.0,
                               "a_max": 1000.0})
    q, qd, T = 0.96, 0.5, 0.1     # braking mildly: apex past the horizon
    hA = 2.0 * (1.0 - q - qd * T) / T**2
    assert -qd / T < hA < 0.0
    lo, hi = acceleration_bounds(m, [q], [qd], 1e-3, horizon=T)
    assert hi[0] == hA


def test_crossed_interval_falls_back_to_velocity_bound(caplog):
    m = pendulum_model(limits={"q_min": -1.0, "q_max": 1.0, "v_max": 2.0,
                               "a_max": 5.0})
    with caplog.at_level(logging.WARNING, logger="handover.constraints"):
        lo, hi = acceleration_bounds(m, [1.01], [0.1], 1e-3)
    assert "falling back" in caplog.text
    np.testing.assert_array_equal(lo, [(-2.0 - 0.1) / 1e-3])
    np.testing.assert_array_equal(hi, [(2.0 - 0.1) / 1e-3])


def test_driving_into_the_wall_never_crosses_it(caplog):
    """1-DoF joint commanded as hard as allowed must settle below q_max."""
    m = pendulum_model(limits={"q_min": -2.0, "q_max": 1.0, "v_max": 0.3,
                               "a_max": 10.0})
    dt = 1e-3
    q, qd = np.array([0.0]), np.array([0.0])
    q_peak = -np.inf
    with caplog.at_level(logging.WARNING, logger="handover.constraints"):
        for _ in range(10_000):
            lo, hi = acceleration_bounds(m, q, qd, dt)
            qd = qd + hi * dt     # always take the most aggressive acceleration
            q = q + qd * dt
            q_peak = max(q_peak, q[0])
            assert q[0] <= 1.0 + 1e-9
            assert abs(qd[0]) <= 0.3 + 1e-9
    assert caplog.text == ""      # never painted itself into a corner
    assert q_peak > 1.0 - 0.005   # and it actually reached the wall


# ------------------------------------------------------------- torque rows

def test_torque_rows_encode_inverse_dynamics():
    m = planar_model(0.5, 0.4)
    lay = DecisionLayout(m.n)
    q = np.array([0.4, -0.7])
    qd = np.array([0.3, 0.2])
    cons = joint_limit_constraints(m, q, qd, 1e-3, lay)
    assert cons.C.shape == (2 * m.n, lay.dim)

    rng = np.random.default_rng(3)
    chi = rng.standard_normal(lay.dim)
    qdd = chi[lay.qdd]
    f = chi[lay.wrench]
    M = mass_matrix(m, q)
    N = nonlinear_terms(m, q, qd)
    J = jacobian(m, q)
    tau = M @ qdd + N - J.T @ f
    tau_max = m.limit_arrays()[4]
    np.testing.assert_allclose(cons.C[:m.n] @ chi - cons.d[:m.n],
                               tau - tau_max, atol=1e-12)
    np.testing.assert_allclose(cons.C[m.n:] @ chi - cons.d[m.n:],
                               -tau - tau_max, atol=1e-12)


def test_torque_rows_inactive_for_modest_commands():
    m = planar_model(0.5, 0.4)
    lay = DecisionLayout(m.n)
    cons = joint_limit_constraints(m, np.zeros(2), np.zeros(2), 1e-3, lay)
    chi = np.zeros(lay.dim)
    assert np.all(cons.C @ chi <= cons.d)    # gravity alone is within limits


# ---------------------------------------------------------------- collision

def _tip_setup():
    m = planar_model(0.5)
    tip = LinkSphere(0, np.array([0.5, 0.0, 0.0]), 0.02)
    return m, tip


def test_collision_inactive_when_clear():
    m, tip = _tip_setup()
    ball = Sphere(np.array([0.5, 1.0, 0.0]), 0.05)   # ~0.93 m of clearance
    out = collision_constraint(tip, ball, m, [0.0], [0.0], 1e-3, DecisionLayout(1))
    assert out is None


def test_collision_row_semantics():
    m, tip = _tip_setup()
    lay = DecisionLayout(1)
    params = CollisionParams()
    ball = Sphere(np.array([0.5, 0.12, 0.0]), 0.05)
    qd = np.array([1.0])                        # tip closing at 0.5 m/s
    out = collision_constraint(tip, ball, m, [0.0], qd, 1e-3, lay, params)
    assert out is not None
    row, rhs = out

    d = 0.12 - 0.02 - 0.05                      # 0.05, inside the band
    normal = np.array([0.0, -1.0, 0.0])         # from obstacle toward the tip
    Jp = point_jacobian(m, [0.0], 0, tip.center)
    nJ = normal @ Jp
    ddot = float(nJ @ qd)
    floor = -params.xi * (d - params.d_safe) / (params.d_influence - params.d_safe)
    np.testing.assert_allclose(row[lay.qdd], -nJ * 1e-3, atol=1e-15)
    assert np.all(row[lay.obs_acc] == 0.0) and np.all(row[lay.wrench] == 0.0)
    assert rhs == pytest.approx(ddot - floor, abs=1e-12)
    # closing faster than the damper allows at d=0.05: zero q̈ must violate
    assert rhs < 0.0


def test_collision_boundary_enforces_nonnegative_separation_rate():
    m, tip = _tip_setup()
    lay = DecisionLayout(1)
    ball = Sphere(np.array([0.5, 0.09, 0.0]), 0.05)  # d exactly d_safe = 0.02
    out = collision_constraint(tip, ball, m, [0.0], [0.0], 1e-3, lay)
    row, rhs = out
    # at rest on the safety boundary: row demands d-rate >= 0 next step
    assert rhs == pytest.approx(0.0, abs=1e-12)


def test_collision_overlap_demands_separation(caplog):
    m, tip = _tip_setup()
    lay = DecisionLayout(1)
    ball = Sphere(np.array([0.5, 0.05, 0.0]), 0.05)  # d = -0.02, overlapping
    with caplog.at_level(logging.WARNING, logger="handover.constraints"):
        row, rhs = collision_constraint(tip, ball, m, [0.0], [0.0], 1e-3, lay)
    assert "overlap" in caplog.text
    assert rhs == pytest.approx(0.0 - 1.0, abs=1e-12)   # ddot - xi


def test_damper_keeps_driven_tip_clear():
    """Tip pushed straight at an obstacle stays d_safe away (within 1 mm)."""
    m = planar_model(0.4, 0.4)
    lay = DecisionLayout(2)
    tip = LinkSphere(1, np.array([0.4, 0.0, 0.0]), 0.02)
    ball = Sphere(np.array([0.55, 0.35, 0.0]), 0.05)
    params = CollisionParams()

    q = np.array([1.2, -0.9])
    qd = np.zeros(2)
    dt = 1e-3
    min_d = np.inf
    for i in range(4000):
        p = link_point(m, q, 1, tip.center)
        Jp = point_jacobian(m, q, 1, tip.center)
        # workspace PD pulling the tip into the obstacle center
        a_des = 4.0 * (ball.center - p) - 4.0 * (Jp @ qd)
        qdd_des = np.linalg.pinv(Jp) @ a_des
        E = np.zeros((2, lay.dim))
        E[:, lay.qdd] = np.eye(2)
        cons = ConstraintSet.empty(lay.dim)
        cons = cons.pin(lay.obs_acc, 0.0).pin(lay.wrench, 0.0)
        out = collision_constraint(tip, ball, m, q, qd, dt, lay, params)
        if out is not None:
            cons = cons.with_rows(out[0], [out[1]])
        sol = solve_qp([TaskBlock(E, -qdd_des, 1.0, "drive")], cons)
        assert sol.ok
        qd = qd + sol.x[lay.qdd] * dt
        q = q + qd * dt
        d = np.linalg.norm(link_point(m, q, 1, tip.center) - ball.center) - 0.07
        min_d = min(min_d, d)
    assert min_d >= params.d_safe - 1e-3
    assert min_d <= params.d_safe + 0.005    # it really leaned on the damper


def test_concentric_spheres_warn(caplog):
    m, tip = _tip_setup()
    ball = Sphere(np.array([0.5, 0.0, 0.0]), 0.05)
    with caplog.at_level(logging.WARNING, logger="handover.constraints"):
        out = collision_constraint(tip, ball, m, [0.0], [0.0], 1e-3,
                                   DecisionLayout(1))
    assert out is not None
    assert "concentric" in caplog.text
