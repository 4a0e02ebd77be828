"""Unit tests for the rigid-body model: FK, Jacobians, dynamics."""

import numpy as np
import pytest

from handover.geometry import quat_geodesic_angle, quat_to_rotation
from handover.robot import (
    ArmKinematics,
    JointState,
    ModelError,
    bundled_model,
    chain_frames,
    forward_kinematics,
    inverse_dynamics,
    jacobian,
    jacobian_dot_times_qdot,
    link_point,
    load_model,
    mass_matrix,
    nonlinear_terms,
    point_jacobian,
    rnea,
)

from conftest import POINT_INERTIA, WIDE_LIMITS, pendulum_model, planar_model, random_configurations


# -- loading and validation -------------------------------------------------

def test_bundled_model_has_seven_joints(panda):
    assert panda.n == 7
    q_min, q_max, v_max, a_max, tau_max = panda.limit_arrays()
    assert np.all(q_min < q_max)
    assert np.all(v_max > 0) and np.all(tau_max > 0)


def test_single_joint_fk_at_zero_is_fixed_chain():
    m = load_model({
        "joints": [{
            "axis": [0, 0, 1],
            "origin": {"translation": [0.1, 0.2, 0.3], "rotation": [1, 0, 0, 0]},
            "limits": dict(WIDE_LIMITS),
            "link": {"mass": 1.0, "com": [0, 0, 0], "inertia": POINT_INERTIA},
        }],
        "end_effector": {"translation": [0.0, 0.0, 0.5], "rotation": [1, 0, 0, 0]},
    })
    assert m.n == 1
    pose = forward_kinematics(m, [0.0])
    np.testing.assert_allclose(pose.position, [0.1, 0.2, 0.8], atol=1e-15)


def test_bad_limit_order_names_joint():
    doc = {
        "joints": [{
            "axis": [0, 0, 1],
            "origin": {},
            "limits": {"q_min": 1.0, "q_max": -1.0, "v_max": 1, "a_max": 1, "tau_max": 1},
            "link": {"mass": 1.0, "com": [0, 0, 0], "inertia": POINT_INERTIA},
        }],
        "end_effector": {},
    }
    with pytest.raises(ModelError, match=r"joints\[0\]\.limits"):
        load_model(doc)


def test_non_unit_axis_rejected():
    doc = {
        "joints": [{
            "axis": [0, 0, 2],
            "origin": {},
            "limits": dict(WIDE_LIMITS),
            "link": {"mass": 1.0, "com": [0, 0, 0], "inertia": POINT_INERTIA},
        }],
        "end_effector": {},
    }
    with pytest.raises(ModelError, match=r"joints\[0\]\.axis"):
        load_model(doc)


def test_indefinite_inertia_rejected():
    doc = {
        "joints": [{
            "axis": [0, 0, 1],
            "origin": {},
            "limits": dict(WIDE_LIMITS),
            "link": {"mass": 1.0, "com": [0, 0, 0],
                     "inertia": [1, 0, 0, 0, -1, 0, 0, 0, 1]},
        }],
        "end_effector": {},
    }
    with pytest.raises(ModelError, match=r"joints\[0\]\.link\.inertia"):
        load_model(doc)


def test_joint_state_validation():
    with pytest.raises(ValueError):
        JointState([0.0, 0.0], [0.0])
    with pytest.raises(ValueError):
        JointState([np.nan], [0.0])


# -- forward kinematics -----------------------------------------------------

def test_planar_two_link_stretched():
    m = planar_model(1.0, 1.0)
    np.testing.assert_allclose(forward_kinematics(m, [0.0, 0.0]).position,
                               [2.0, 0.0, 0.0], atol=1e-15)


def test_planar_two_link_quarter_turn():
    m = planar_model(1.0, 1.0)
    np.testing.assert_allclose(forward_kinematics(m, [np.pi / 2, 0.0]).position,
                               [0.0, 2.0, 0.0], atol=1e-12)


def test_fk_orientation_unit_norm(panda):
    rng = np.random.default_rng(20)
    for q in random_configurations(panda, 10, rng):
        pose = forward_kinematics(panda, q)
        assert abs(np.linalg.norm(pose.orientation) - 1.0) < 1e-9


# -- jacobian ---------------------------------------------------------------

def test_planar_one_link_jacobian_by_hand():
    L = 0.8
    m = planar_model(L)
    J = jacobian(m, [0.0])
    np.testing.assert_allclose(J[:3, 0], [0.0, L, 0.0], atol=1e-15)
    np.testing.assert_allclose(J[3:, 0], [0.0, 0.0, 1.0], atol=1e-15)


def jacobian_fd(model, q, h=1e-6):
    """Central-difference linear and angular Jacobian oracle."""
    n = model.n
    Jlin = np.zeros((3, n))
    Jang = np.zeros((3, n))
    for i in range(n):
        e = np.zeros(n)
        e[i] = h
        fp = chain_frames(model, q + e)
        fm = chain_frames(model, q - e)
        Jlin[:, i] = (fp.p_ee - fm.p_ee) / (2 * h)
        dR = fp.R_ee @ fm.R_ee.T
        Jang[:, i] = 0.5 * np.array([dR[2, 1] - dR[1, 2],
                                     dR[0, 2] - dR[2, 0],
                                     dR[1, 0] - dR[0, 1]]) / (2 * h)
    return Jlin, Jang


def test_jacobian_finite_difference_sweep(panda):
    rng = np.random.default_rng(21)
    for q in random_configurations(panda, 50, rng):
        J = jacobian(panda, q)
        Jlin, Jang = jacobian_fd(panda, q)
        np.testing.assert_allclose(J[:3], Jlin, atol=1e-5)
        np.testing.assert_allclose(J[3:], Jang, atol=1e-4)


def test_point_jacobian_matches_fd(panda):
    rng = np.random.default_rng(22)
    q = random_configurations(panda, 1, rng)[0]
    point = np.array([0.02, -0.01, 0.05])
    for idx in (2, 4, 6):
        Jp = point_jacobian(panda, q, idx, point)
        h = 1e-6
        fd = np.zeros((3, panda.n))
        for i in range(panda.n):
            e = np.zeros(panda.n)
            e[i] = h
            fd[:, i] = (link_point(panda, q + e, idx, point)
                        - link_point(panda, q - e, idx, point)) / (2 * h)
        np.testing.assert_allclose(Jp, fd, atol=1e-5)
        assert np.all(Jp[:, idx + 1:] == 0.0)


# -- jacobian drift ---------------------------------------------------------

def test_jdot_qdot_zero_velocity(panda):
    rng = np.random.default_rng(23)
    q = random_configurations(panda, 1, rng)[0]
    assert np.array_equal(jacobian_dot_times_qdot(panda, q, np.zeros(7)), np.zeros(6))


def test_planar_one_link_centripetal():
    L = 0.8
    m = planar_model(L)
    jd = jacobian_dot_times_qdot(m, [0.0], [1.0])
    np.testing.assert_allclose(jd[:3], [-L, 0.0, 0.0], atol=1e-12)
    np.testing.assert_allclose(jd[3:], np.zeros(3), atol=1e-12)


def test_jdot_qdot_finite_difference(panda):
    rng = np.random.default_rng(24)
    h = 1e-6
    for q in random_configurations(panda, 20, rng):
        qdot = rng.uniform(-1.0, 1.0, panda.n)
        jd = jacobian_dot_times_qdot(panda, q, qdot)
        jd_fd = (jacobian(panda, q + qdot * h) - jacobian(panda, q - qdot * h)) / (2 * h) @ qdot
        np.testing.assert_allclose(jd, jd_fd, atol=1e-4)


# -- mass matrix ------------------------------------------------------------

def test_pendulum_mass_matrix():
    mass, length = 1.3, 0.7
    m = pendulum_model(mass, length)
    assert mass_matrix(m, [0.6])[0, 0] == pytest.approx(mass * length**2, abs=1e-9)


def test_mass_matrix_symmetric_positive_definite(panda):
    rng = np.random.default_rng(25)
    for q in random_configurations(panda, 100, rng):
        M = mass_matrix(panda, q)
        assert np.max(np.abs(M - M.T)) < 1e-10
        assert np.min(np.linalg.eigvalsh(M)) > 0.0


def test_mass_matrix_matches_newton_euler_columns(panda):
    # Two independent routes to M(q): CoM-Jacobian assembly vs unit-q̈ sweeps
    # of the recursion with gravity off.
    rng = np.random.default_rng(26)
    for q in random_configurations(panda, 5, rng):
        M = mass_matrix(panda, q)
        cols = [rnea(panda, q, np.zeros(7), np.eye(7)[i], gravity=(0, 0, 0))
                for i in range(7)]
        np.testing.assert_allclose(M, np.column_stack(cols), atol=1e-10)


# -- nonlinear terms --------------------------------------------------------

def test_nonlinear_terms_vanish_at_rest_no_gravity(panda):
    rng = np.random.default_rng(27)
    q = random_configurations(panda, 1, rng)[0]
    np.testing.assert_allclose(nonlinear_terms(panda, q, np.zeros(7), gravity=(0, 0, 0)),
                               np.zeros(7), atol=1e-12)


def test_pendulum_gravity_torque():
    mass, length = 1.3, 0.7
    m = pendulum_model(mass, length)
    for q in (0.0, 0.6, -1.2, 2.5):
        assert nonlinear_terms(m, [q], [0.0])[0] == pytest.approx(
            mass * 9.81 * length * np.sin(q), abs=1e-9)


def energy_balance_error(model, q0, qd0, dt=1e-3, duration=1.0, seed=0):
    """Simulate gravity-free forward dynamics under a probe torque and return
    the relative gap between kinetic-energy change and injected work.

    RK4 on the state (q, q̇, work) so the quadrature error stays far below the
    tolerance being asserted.
    """
    rng = np.random.default_rng(seed)
    phase = rng.uniform(0, 2 * np.pi, model.n)
    n = model.n

    def torque(t):
        return 2.0 * np.sin(2 * np.pi * 1.3 * t + phase)

    def deriv(t, y):
        q, qd = y[:n], y[n:2 * n]
        tau = torque(t)
        M = mass_matrix(model, q)
        N = nonlinear_terms(model, q, qd, gravity=(0, 0, 0))
        return np.concatenate([qd, np.linalg.solve(M, tau - N), [qd @ tau]])

    y = np.concatenate([q0, qd0, [0.0]])
    e0 = 0.5 * qd0 @ mass_matrix(model, q0) @ qd0
    t = 0.0
    for _ in range(int(round(duration / dt))):
        k1 = deriv(t, y)
        k2 = deriv(t + dt / 2, y + dt / 2 * k1)
        k3 = deriv(t + dt / 2, y + dt / 2 * k2)
        k4 = deriv(t + dt, y + dt * k3)
        y = y + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        t += dt
    q, qd, work = y[:n], y[n:2 * n], y[-1]
    e1 = 0.5 * qd @ mass_matrix(model, q) @ qd
    return abs((e1 - e0) - work) / max(abs(work), 1e-9)


def test_energy_balance(panda):
    rng = np.random.default_rng(3)
    q0 = rng.uniform(-1.0, 1.0, 7)
    qd0 = rng.uniform(-1.0, 1.0, 7)
    assert energy_balance_error(panda, q0, qd0) < 1e-3


# -- inverse dynamics -------------------------------------------------------

def test_inverse_dynamics_trivial_zero(panda):
    rng = np.random.default_rng(28)
    q = random_configurations(panda, 1, rng)[0]
    model_no_g = load_model({
        "name": "ng", "gravity": [0, 0, 0],
        "joints": [dict(axis=j.axis.tolist(),
                        origin=dict(translation=j.origin.position.tolist(),
                                    rotation=j.origin.orientation.tolist()),
                        limits=vars(j.limits).copy(),
                        link=dict(mass=j.link.mass, com=j.link.com.tolist(),
                                  inertia=j.link.inertia.reshape(-1).tolist()))
                   for j in panda.joints],
        "end_effector": dict(translation=panda.end_effector.position.tolist(),
                             rotation=panda.end_effector.orientation.tolist()),
    })
    tau = inverse_dynamics(model_no_g, q, np.zeros(7), np.zeros(7))
    np.testing.assert_allclose(tau, np.zeros(7), atol=1e-12)


def test_inverse_dynamics_roundtrip(panda):
    rng = np.random.default_rng(29)
    q = random_configurations(panda, 1, rng)[0]
    qd = rng.uniform(-1, 1, 7)
    tau_probe = rng.uniform(-5, 5, 7)
    M = mass_matrix(panda, q)
    N = nonlinear_terms(panda, q, qd)
    qdd = np.linalg.solve(M, tau_probe - N)
    np.testing.assert_allclose(inverse_dynamics(panda, q, qd, qdd), tau_probe,
                               atol=1e-8)


def test_pendulum_static_torque():
    mass, length = 1.3, 0.7
    m = pendulum_model(mass, length)
    tau = inverse_dynamics(m, [0.6], [0.0], [0.0])
    assert tau[0] == pytest.approx(mass * 9.81 * length * np.sin(0.6), abs=1e-9)


def test_inverse_dynamics_contact_wrench(panda):
    rng = np.random.default_rng(30)
    q = random_configurations(panda, 1, rng)[0]
    f = rng.uniform(-2, 2, 6)
    base = inverse_dynamics(panda, q, np.zeros(7), np.zeros(7))
    with_f = inverse_dynamics(panda, q, np.zeros(7), np.zeros(7), f_ext=f)
    np.testing.assert_allclose(with_f, base - jacobian(panda, q).T @ f, atol=1e-12)


# -- cache ------------------------------------------------------------------

def test_arm_kinematics_cache_matches_pure_functions(panda):
    rng = np.random.default_rng(31)
    q = random_configurations(panda, 1, rng)[0]
    qd = rng.uniform(-1, 1, 7)
    cache = ArmKinematics(panda).update(q, qd)
    assert np.array_equal(cache.J, jacobian(panda, q))
    assert np.array_equal(cache.M, mass_matrix(panda, q))
    assert np.array_equal(cache.N, nonlinear_terms(panda, q, qd))
    assert np.array_equal(cache.jdot_qdot, jacobian_dot_times_qdot(panda, q, qd))
    assert quat_geodesic_angle(cache.pose.orientation,
                               forward_kinematics(panda, q).orientation) < 1e-12
