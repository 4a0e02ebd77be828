"""Hard limits turned into QP rows: joint limits, torque limits, collision.

Joint position/velocity/acceleration limits become box bounds on the
joint-acceleration block; torque limits and collision avoidance become
general inequality rows.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .qp import ConstraintSet, DecisionLayout
from .robot import RobotModel, chain_frames, jacobian, link_point, mass_matrix, nonlinear_terms, point_jacobian

log = logging.getLogger("handover.constraints")

DEFAULT_HORIZON = 0.1


def acceleration_bounds(model: RobotModel, q, qdot, dt: float,
                        horizon: float = DEFAULT_HORIZON):
    """Per-joint q̈ interval honoring acceleration, velocity and position limits.

    The position limit uses a look-ahead of ``horizon`` seconds under constant
    q̈ and bounds the whole parabola, not just its endpoint: when braking puts
    the apex inside the horizon, the bound becomes the exact
    stop-at-the-limit deceleration  q̈ = -q̇² / 2(q_max - q).
    Crossed intervals (the state already violates something) fall back to the
    velocity-reachability bound with a warning.
    """
    q = np.asarray(q, dtype=float)
    qdot = np.asarray(qdot, dtype=float)
    q_min, q_max, v_max, a_max, _ = model.limit_arrays()
    T = horizon

    lo = np.maximum(-a_max, (-v_max - qdot) / dt)
    hi = np.minimum(a_max, (v_max - qdot) / dt)

    gap_hi = np.maximum(q_max - q, 1e-12)
    gap_lo = np.maximum(q - q_min, 1e-12)
    hA = 2.0 * (q_max - q - qdot * T) / T**2
    lA = 2.0 * (q_min - q - qdot * T) / T**2

    # upper position bound: apex inside horizon only when moving up and braking
    apex_hi = np.where((qdot > 0.0) & (hA < -qdot / T),
                       -qdot**2 / (2.0 * gap_hi), hA)
    # lower position bound, mirrored
    apex_lo = np.where((qdot < 0.0) & (lA > -qdot / T),
                       qdot**2 / (2.0 * gap_lo), lA)

    hi2 = np.minimum(hi, apex_hi)
    lo2 = np.maximum(lo, apex_lo)

    crossed = lo2 > hi2
    if np.any(crossed):
        log.warning("joint limit interval empty for joints %s; falling back to "
                    "velocity bound", np.flatnonzero(crossed).tolist())
        vel_lo = (-v_max - qdot) / dt
        vel_hi = (v_max - qdot) / dt
        lo2 = np.where(crossed, vel_lo, lo2)
        hi2 = np.where(crossed, vel_hi, hi2)
    return lo2, hi2


def joint_limit_constraints(model: RobotModel, q, qdot, dt: float,
                            layout: DecisionLayout,
                            horizon: float = DEFAULT_HORIZON,
                            M=None, N=None, J=None) -> ConstraintSet:
    """Box bounds on q̈ plus torque rows ±(M q̈ + N − J_eeᵀ f) ≤ τ_max."""
    q = np.asarray(q, dtype=float)
    qdot = np.asarray(qdot, dtype=float)
    n = model.n
    lo = np.full(layout.dim, -np.inf)
    hi = np.full(layout.dim, np.inf)
    lo[layout.qdd], hi[layout.qdd] = acceleration_bounds(model, q, qdot, dt, horizon)

    if M is None:
        M = mass_matrix(model, q)
    if N is None:
        N = nonlinear_terms(model, q, qdot)
    if J is None:
        J = jacobian(model, q)
    tau_max = model.limit_arrays()[4]
    row = np.zeros((n, layout.dim))
    row[:, layout.qdd] = M
    row[:, layout.wrench] = -J.T
    C = np.vstack([row, -row])
    d = np.concatenate([tau_max - N, tau_max + N])
    return ConstraintSet(C, d, lo, hi)


@dataclass
class LinkSphere:
    """Collision sphere riding on a robot link (center in link frame)."""

    link_index: int
    center: np.ndarray
    radius: float

    def __post_init__(self):
        self.center = np.asarray(self.center, dtype=float).reshape(3)


@dataclass
class Sphere:
    """Static obstacle sphere in world coordinates."""

    center: np.ndarray
    radius: float

    def __post_init__(self):
        self.center = np.asarray(self.center, dtype=float).reshape(3)


@dataclass
class CollisionParams:
    d_safe: float = 0.02
    d_influence: float = 0.10
    xi: float = 1.0           # damper gain [1/s]


def collision_constraint(sphere_a: LinkSphere, sphere_b: Sphere,
                         model: RobotModel, q, qdot, dt: float,
                         layout: DecisionLayout,
                         params: CollisionParams | None = None,
                         frames=None):
    """Velocity-damper row keeping the sphere pair at distance ≥ d_safe.

    Active only inside the influence band; returns None when clear.  The
    damper ḋ ≥ -ξ (d - d_safe)/(d_influence - d_safe) is expressed over q̈
    through the next-step velocity q̇ + q̈ dt.
    """
    p = params or CollisionParams()
    q = np.asarray(q, dtype=float)
    qdot = np.asarray(qdot, dtype=float)
    fr = frames if frames is not None else chain_frames(model, q)
    pa = link_point(model, q, sphere_a.link_index, sphere_a.center, fr)
    delta = pa - sphere_b.center
    dist_centers = float(np.linalg.norm(delta))
    d = dist_centers - sphere_a.radius - sphere_b.radius
    if d >= p.d_influence:
        return None
    if dist_centers < 1e-9:
        # concentric spheres: no usable normal, push along +z and complain
        normal = np.array([0.0, 0.0, 1.0])
        log.warning("collision spheres concentric on link %d", sphere_a.link_index)
    else:
        normal = delta / dist_centers
    Jp = point_jacobian(model, q, sphere_a.link_index, sphere_a.center, fr)
    nJ = normal @ Jp
    ddot = float(nJ @ qdot)
    if d <= 0.0:
        log.warning("collision spheres overlapping on link %d (d=%.4f)",
                    sphere_a.link_index, d)
        rate_floor = p.xi          # demand strictly separating motion
    else:
        rate_floor = -p.xi * (d - p.d_safe) / (p.d_influence - p.d_safe)
    # ddot + n^T Jp qdd dt >= rate_floor   (J̇ term dropped over one step)
    row = np.zeros(layout.dim)
    row[layout.qdd] = -nJ * dt
    rhs = ddot - rate_floor
    return row, rhs
