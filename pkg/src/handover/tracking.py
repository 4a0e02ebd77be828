"""End-effector tracking toward the grasp frame carried by the observer.

The grasp frame rides rigidly on the observed object, so its full state
(pose, twist, acceleration) comes straight from frame propagation.  The
tracking residual feeds the grasp acceleration forward and applies PD
feedback on the pose/twist error, which lets the end-effector converge onto
the *future* of the target instead of chasing its past.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .geometry import Pose, quat_align, quat_conjugate, quat_ominus
from .observer import FullState, propagate_frame
from .robot import ChainFrames, RobotModel, forward_kinematics, jacobian, jacobian_dot_times_qdot

FULL_MASK = (True, True, True)


@dataclass
class GraspSpec:
    """Grasp frame fixed on the object, plus which orientation axes must align.

    ``mask`` marks the orientation axes that are tracked; the others are left
    free (cylinder-like objects where spin about the symmetry axis is
    irrelevant).
    """

    local_pose: Pose = field(default_factory=Pose)
    mask: tuple[bool, bool, bool] = FULL_MASK

    def __post_init__(self):
        self.mask = tuple(bool(m) for m in self.mask)
        if len(self.mask) != 3:
            raise ValueError("mask must cover the three orientation axes")


@dataclass
class TrackingGains:
    k_s: np.ndarray
    k_d: np.ndarray

    def __post_init__(self):
        self.k_s = np.asarray(self.k_s, dtype=float).reshape(6)
        self.k_d = np.asarray(self.k_d, dtype=float).reshape(6)
        if np.any(self.k_s <= 0.0) or np.any(self.k_d <= 0.0):
            raise ValueError("tracking gains must be strictly positive")

    @classmethod
    def default(cls) -> "TrackingGains":
        # orientation stiffness twice the translation stiffness, both
        # critically damped
        k = np.array([1.0, 1.0, 1.0, 2.0, 2.0, 2.0])
        return cls(k, 2.0 * np.sqrt(k))


@dataclass
class TrackingState:
    error: np.ndarray
    error_rate: np.ndarray

    def __post_init__(self):
        self.error = np.asarray(self.error, dtype=float).reshape(6)
        self.error_rate = np.asarray(self.error_rate, dtype=float).reshape(6)

    @property
    def vector(self) -> np.ndarray:
        return np.concatenate([self.error, self.error_rate])


def grasp_frame_state(s_obs: FullState, spec: GraspSpec) -> FullState:
    """Full state of the grasp frame implied by the current object estimate."""
    return propagate_frame(s_obs, spec.local_pose)


def tracking_error(x_ee: Pose, x_grasp: Pose, mask=FULL_MASK) -> np.ndarray:
    """[P_ee - P_grasp; q_ee (-) q_grasp^-1] with masked orientation rows zeroed."""
    q_ee = quat_align(x_ee.orientation, x_grasp.orientation)
    e = np.concatenate([
        x_ee.position - x_grasp.position,
        quat_ominus(q_ee, quat_conjugate(x_grasp.orientation)),
    ])
    for i, keep in enumerate(mask):
        if not keep:
            e[3 + i] = 0.0
    return e


def tracking_state(x_ee: Pose, twist_ee, s_grasp: FullState, mask=FULL_MASK) -> TrackingState:
    e = tracking_error(x_ee, s_grasp.pose, mask)
    edot = np.asarray(twist_ee, dtype=float) - s_grasp.twist
    for i, keep in enumerate(mask):
        if not keep:
            edot[3 + i] = 0.0
    return TrackingState(e, edot)


def tracking_task_residual(model: RobotModel, q, qdot, s_grasp: FullState,
                           gains: TrackingGains, layout, mask=FULL_MASK,
                           frames: ChainFrames | None = None):
    """Affine residual (E, F) over the decision vector for the tracking task.

    E carries the end-effector Jacobian on the joint-acceleration block;
    F = J̇q̇ - grasp accel + K_s e + K_d ė, so a zero residual realizes the
    critically damped error dynamics with the grasp acceleration fed forward.
    Masked axes have their F rows zeroed entirely and contribute no tracking
    objective.
    """
    q = np.asarray(q, dtype=float)
    qdot = np.asarray(qdot, dtype=float)
    J = jacobian(model, q, frames)
    x_ee = forward_kinematics(model, q, frames)
    eta = tracking_state(x_ee, J @ qdot, s_grasp, mask)
    E = np.zeros((6, layout.dim))
    E[:, layout.qdd] = J
    F = (jacobian_dot_times_qdot(model, q, qdot, frames) - s_grasp.accel
         + gains.k_s * eta.error + gains.k_d * eta.error_rate)
    for i, keep in enumerate(mask):
        if not keep:
            F[3 + i] = 0.0
    return E, F, eta


def closed_loop_matrix(gains: TrackingGains) -> np.ndarray:
    A = np.zeros((12, 12))
    A[:6, 6:] = np.eye(6)
    A[6:, :6] = -np.diag(gains.k_s)
    A[6:, 6:] = -np.diag(gains.k_d)
    return A
