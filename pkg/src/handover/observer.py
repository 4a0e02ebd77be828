"""Pose observer: a second-order reference model driven toward sensor poses.

The observer carries a full kinematic state (pose, twist, spatial
acceleration) and is pulled toward the latest measured object pose by a
stiff critically-damped PD law.  Integrating that law at the control rate
turns the low-rate, noisy, pose-only sensor stream into a smooth
twice-differentiable estimate with consistent velocity and acceleration —
which is what the downstream tracking task needs to anticipate the motion.

Twists stack linear over angular components; angular quantities are
world-frame.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .geometry import (
    Pose,
    cross3,
    integrate_quat,
    quat_align,
    quat_conjugate,
    quat_ominus,
    quat_product,
    quat_to_rotation,
)


@dataclass
class FullState:
    """Pose + twist + spatial acceleration of one frame (19 numbers)."""

    pose: Pose = field(default_factory=Pose)
    twist: np.ndarray = field(default_factory=lambda: np.zeros(6))
    accel: np.ndarray = field(default_factory=lambda: np.zeros(6))

    def __post_init__(self):
        self.twist = np.asarray(self.twist, dtype=float).reshape(6)
        self.accel = np.asarray(self.accel, dtype=float).reshape(6)

    def copy(self) -> "FullState":
        return FullState(self.pose.copy(), self.twist.copy(), self.accel.copy())


@dataclass
class ObserverGains:
    """Diagonal stiffness [1/s^2] and damping [1/s] of the observer loop."""

    k_s: np.ndarray
    k_d: np.ndarray

    def __post_init__(self):
        self.k_s = np.asarray(self.k_s, dtype=float).reshape(6)
        self.k_d = np.asarray(self.k_d, dtype=float).reshape(6)
        if np.any(self.k_s <= 0.0) or np.any(self.k_d <= 0.0):
            raise ValueError("observer gains must be strictly positive")

    @classmethod
    def default(cls) -> "ObserverGains":
        k = 1500.0 * np.ones(6)
        return cls(k, 2.0 * np.sqrt(k))      # critically damped


@dataclass
class ObserverState:
    """Observation-task state: pose error stacked over its rate."""

    error: np.ndarray
    error_rate: np.ndarray

    def __post_init__(self):
        self.error = np.asarray(self.error, dtype=float).reshape(6)
        self.error_rate = np.asarray(self.error_rate, dtype=float).reshape(6)

    @property
    def vector(self) -> np.ndarray:
        return np.concatenate([self.error, self.error_rate])


def observation_error(x_obs: Pose, x_obj: Pose) -> np.ndarray:
    """Pose discrepancy [P_obs - P_obj; q_obs (-) q_obj^-1]."""
    return np.concatenate([
        x_obs.position - x_obj.position,
        quat_ominus(x_obs.orientation, quat_conjugate(x_obj.orientation)),
    ])


def observer_feedback(eta: ObserverState, gains: ObserverGains) -> np.ndarray:
    """Desired observer spatial acceleration mu = -K_s e - K_d edot."""
    return -gains.k_s * eta.error - gains.k_d * eta.error_rate


def integrate_observer(s_obs: FullState, mu: np.ndarray, dt: float) -> FullState:
    """Advance the observer one step with semi-implicit Euler.

    Velocity first, then position with the updated velocity; the orientation
    is rotated by the exponential of the updated angular velocity.
    """
    mu = np.asarray(mu, dtype=float).reshape(6)
    twist = s_obs.twist + mu * dt
    pose = Pose(s_obs.pose.position + twist[:3] * dt,
                integrate_quat(s_obs.pose.orientation, twist[3:], dt))
    return FullState(pose, twist, mu.copy())


def propagate_frame(s_obs: FullState, local_pose: Pose) -> FullState:
    """Full state of a frame rigidly attached to the observed body.

    With r = R p_local the offset in world coordinates:
        P* = P + r
        Pdot* = Pdot + w x r
        Pddot* = Pddot + wdot x r + w x (w x r)
    and the angular components carry over unchanged.
    """
    R = s_obs.pose.rotation
    r = R @ local_pose.position
    w = s_obs.twist[3:]
    dw = s_obs.accel[3:]
    pos = s_obs.pose.position + r
    vel = s_obs.twist[:3] + cross3(w, r)
    acc = s_obs.accel[:3] + cross3(dw, r) + cross3(w, cross3(w, r))
    quat = quat_product(s_obs.pose.orientation, local_pose.orientation)
    return FullState(Pose(pos, quat),
                     np.concatenate([vel, w]),
                     np.concatenate([acc, dw]))


def observer_error_state(s_obs: FullState, x_obj: Pose) -> ObserverState:
    """Build the observation-task state against a (sign-aligned) target pose."""
    target = Pose(x_obj.position,
                  quat_align(x_obj.orientation, s_obs.pose.orientation))
    return ObserverState(observation_error(s_obs.pose, target), s_obs.twist.copy())


def closed_loop_matrix(gains: ObserverGains) -> np.ndarray:
    """State matrix of the error dynamics [e; edot] under the feedback law."""
    A = np.zeros((12, 12))
    A[:6, 6:] = np.eye(6)
    A[6:, :6] = -np.diag(gains.k_s)
    A[6:, 6:] = -np.diag(gains.k_d)
    return A
