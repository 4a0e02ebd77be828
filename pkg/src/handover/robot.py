"""Serial-chain rigid-body model: kinematics and dynamics for revolute arms.

The model is loaded from a JSON document (see ``load_model``) and treated as
immutable afterwards.  All quantities are expressed in the world frame:
Jacobians stack linear rows over angular rows, angular velocity is the
world-frame spatial one, and ``mass_matrix`` / ``nonlinear_terms`` realize

    M(q) q̈ + N(q, q̇) = τ + J_cᵀ f

for the chain.  Dynamics use a world-frame Newton-Euler recursion; the mass
matrix is assembled independently from per-link center-of-mass Jacobians so
the two routes cross-check each other in the tests.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Sequence

import numpy as np

from .geometry import Pose, cross3, quat_to_rotation, rotation_to_quat

DEFAULT_GRAVITY = np.array([0.0, 0.0, -9.81])


class ModelError(ValueError):
    """Raised when a robot model document fails validation.

    The message carries the JSON field path of the offending entry.
    """


@dataclass(frozen=True)
class JointLimits:
    q_min: float
    q_max: float
    v_max: float
    a_max: float
    tau_max: float


@dataclass(frozen=True)
class LinkParams:
    mass: float
    com: np.ndarray          # center of mass, link frame [m]
    inertia: np.ndarray      # 3x3 about the CoM, link frame [kg m^2]


@dataclass(frozen=True)
class Joint:
    name: str
    axis: np.ndarray         # unit vector, joint frame
    origin: Pose             # fixed transform from parent link frame
    limits: JointLimits
    link: LinkParams


@dataclass(frozen=True)
class RobotModel:
    name: str
    gravity: np.ndarray
    joints: tuple[Joint, ...]
    end_effector: Pose       # fixed transform from the last link frame

    @property
    def n(self) -> int:
        return len(self.joints)

    def limit_arrays(self):
        """Stacked limit vectors (q_min, q_max, v_max, a_max, tau_max)."""
        L = self.joints
        return (np.array([j.limits.q_min for j in L]),
                np.array([j.limits.q_max for j in L]),
                np.array([j.limits.v_max for j in L]),
                np.array([j.limits.a_max for j in L]),
                np.array([j.limits.tau_max for j in L]))


@dataclass
class JointState:
    q: np.ndarray
    qdot: np.ndarray

    def __post_init__(self):
        self.q = np.asarray(self.q, dtype=float).reshape(-1)
        self.qdot = np.asarray(self.qdot, dtype=float).reshape(-1)
        if self.q.shape != self.qdot.shape:
            raise ValueError("q and qdot dimensions differ")
        if not (np.all(np.isfinite(self.q)) and np.all(np.isfinite(self.qdot))):
            raise ValueError("joint state contains non-finite entries")


# -- model loading ----------------------------------------------------------

def _vec(doc, path, n=3):
    try:
        v = np.asarray(doc, dtype=float).reshape(n)
    except Exception as exc:
        raise ModelError(f"{path}: expected {n} numbers") from exc
    if not np.all(np.isfinite(v)):
        raise ModelError(f"{path}: non-finite entry")
    return v


def _pose(doc, path):
    if not isinstance(doc, dict):
        raise ModelError(f"{path}: expected an object")
    t = _vec(doc.get("translation", (0.0, 0.0, 0.0)), f"{path}.translation")
    r = _vec(doc.get("rotation", (1.0, 0.0, 0.0, 0.0)), f"{path}.rotation", 4)
    nr = np.linalg.norm(r)
    if abs(nr - 1.0) > 1e-6:
        raise ModelError(f"{path}.rotation: quaternion norm {nr:.6f} not 1")
    return Pose(t, r / nr)


def _joint(doc, path):
    if not isinstance(doc, dict):
        raise ModelError(f"{path}: expected an object")
    axis = _vec(doc.get("axis"), f"{path}.axis")
    na = np.linalg.norm(axis)
    if abs(na - 1.0) > 1e-9:
        raise ModelError(f"{path}.axis: norm {na:.9f} not 1")
    lim_doc = doc.get("limits")
    if not isinstance(lim_doc, dict):
        raise ModelError(f"{path}.limits: missing")
    try:
        lim = JointLimits(float(lim_doc["q_min"]), float(lim_doc["q_max"]),
                          float(lim_doc["v_max"]), float(lim_doc["a_max"]),
                          float(lim_doc["tau_max"]))
    except KeyError as exc:
        raise ModelError(f"{path}.limits.{exc.args[0]}: missing") from exc
    if not lim.q_min < lim.q_max:
        raise ModelError(f"{path}.limits: q_min {lim.q_min} >= q_max {lim.q_max}")
    for k in ("v_max", "a_max", "tau_max"):
        if getattr(lim, k) <= 0.0:
            raise ModelError(f"{path}.limits.{k}: must be positive")
    link_doc = doc.get("link")
    if not isinstance(link_doc, dict):
        raise ModelError(f"{path}.link: missing")
    mass = float(link_doc.get("mass", 0.0))
    if mass <= 0.0:
        raise ModelError(f"{path}.link.mass: must be positive")
    inertia = _vec(link_doc.get("inertia"), f"{path}.link.inertia", 9).reshape(3, 3)
    if np.linalg.norm(inertia - inertia.T) > 1e-9 * max(1.0, np.linalg.norm(inertia)):
        raise ModelError(f"{path}.link.inertia: not symmetric")
    if np.min(np.linalg.eigvalsh(inertia)) <= 0.0:
        raise ModelError(f"{path}.link.inertia: not positive-definite")
    link = LinkParams(mass, _vec(link_doc.get("com", (0, 0, 0)), f"{path}.link.com"),
                      inertia)
    return Joint(str(doc.get("name", path)), axis / na, _pose(doc.get("origin", {}), f"{path}.origin"),
                 lim, link)


def load_model(source) -> RobotModel:
    """Load and validate a robot model.

    Args:
        source: dict already parsed, a JSON string, or a path to a JSON file.

    Raises:
        ModelError: with the JSON field path of the first invalid entry.
    """
    if isinstance(source, (str, Path)):
        text = str(source)
        if text.lstrip().startswith("{"):
            doc = json.loads(text)
        else:
            doc = json.loads(Path(source).read_text())
    elif isinstance(source, dict):
        doc = source
    else:
        raise ModelError("model source must be a dict, JSON string, or path")

    joints_doc = doc.get("joints")
    if not isinstance(joints_doc, list) or len(joints_doc) < 1:
        raise ModelError("joints: expected a non-empty array")
    joints = tuple(_joint(j, f"joints[{i}]") for i, j in enumerate(joints_doc))
    if "end_effector" not in doc:
        raise ModelError("end_effector: missing")
    ee = _pose(doc["end_effector"], "end_effector")
    gravity = _vec(doc.get("gravity", DEFAULT_GRAVITY), "gravity")
    return RobotModel(str(doc.get("name", "robot")), gravity, joints, ee)


def bundled_model(name: str = "panda7") -> RobotModel:
    """Load one of the model files shipped with the package."""
    text = resources.files("handover").joinpath(f"models/{name}.json").read_text()
    return load_model(text)


# -- kinematic chain --------------------------------------------------------

def _axis_rotation(axis, angle):
    # Rodrigues about a unit axis.
    K = np.array([[0.0, -axis[2], axis[1]],
                  [axis[2], 0.0, -axis[0]],
                  [-axis[1], axis[0], 0.0]])
    return np.eye(3) + np.sin(angle) * K + (1.0 - np.cos(angle)) * (K @ K)


@dataclass
class ChainFrames:
    """World-frame transforms of every link, evaluated at one configuration."""

    R: np.ndarray            # (n, 3, 3) link frame rotations
    p: np.ndarray            # (n, 3) joint origin positions
    axis: np.ndarray         # (n, 3) joint axes in world frame
    R_ee: np.ndarray
    p_ee: np.ndarray


def chain_frames(model: RobotModel, q: Sequence[float]) -> ChainFrames:
    q = _check_q(model, q)
    n = model.n
    R = np.empty((n, 3, 3))
    p = np.empty((n, 3))
    axis = np.empty((n, 3))
    Rw = np.eye(3)
    pw = np.zeros(3)
    for i, joint in enumerate(model.joints):
        o = joint.origin
        pw = pw + Rw @ o.position
        Rw = Rw @ quat_to_rotation(o.orientation)
        axis[i] = Rw @ joint.axis
        Rw = Rw @ _axis_rotation(joint.axis, q[i])
        p[i] = pw
        R[i] = Rw
    p_ee = pw + Rw @ model.end_effector.position
    R_ee = Rw @ quat_to_rotation(model.end_effector.orientation)
    return ChainFrames(R, p, axis, R_ee, p_ee)


def _check_q(model, q, name="q"):
    q = np.asarray(q, dtype=float).reshape(-1)
    if q.shape[0] != model.n:
        raise ValueError(f"{name} has dimension {q.shape[0]}, model has {model.n} joints")
    return q


def forward_kinematics(model: RobotModel, q, frames: ChainFrames | None = None) -> Pose:
    """End-effector pose in the world frame."""
    fr = frames or chain_frames(model, q)
    return Pose(fr.p_ee, rotation_to_quat(fr.R_ee))


def jacobian(model: RobotModel, q, frames: ChainFrames | None = None) -> np.ndarray:
    """Geometric Jacobian (6 x n): linear rows over angular rows, world frame."""
    fr = frames or chain_frames(model, q)
    J = np.zeros((6, model.n))
    J[:3] = cross3(fr.axis, fr.p_ee - fr.p).T
    J[3:] = fr.axis.T
    return J


def point_jacobian(model: RobotModel, q, link_index: int, point_local,
                   frames: ChainFrames | None = None) -> np.ndarray:
    """Linear Jacobian (3 x n) of a point fixed in the given link's frame."""
    fr = frames or chain_frames(model, q)
    pw = fr.p[link_index] + fr.R[link_index] @ np.asarray(point_local, dtype=float)
    J = np.zeros((3, model.n))
    k = link_index + 1
    J[:, :k] = cross3(fr.axis[:k], pw - fr.p[:k]).T
    return J


def link_point(model: RobotModel, q, link_index: int, point_local,
               frames: ChainFrames | None = None) -> np.ndarray:
    """World coordinates of a point fixed in the given link's frame."""
    fr = frames or chain_frames(model, q)
    return fr.p[link_index] + fr.R[link_index] @ np.asarray(point_local, dtype=float)


def _forward_recursion(model, fr, qdot, qddot, a0):
    """World-frame velocity/acceleration sweep down the chain.

    Returns per-link angular velocity w, angular acceleration dw, and the
    linear acceleration of each joint origin, seeded with base acceleration
    ``a0`` (set to -gravity to fold gravity into the accelerations).
    """
    n = len(fr.p)
    w = np.zeros((n, 3))
    dw = np.zeros((n, 3))
    a = np.zeros((n, 3))
    w_p = np.zeros(3)
    dw_p = np.zeros(3)
    a_p = a0
    p_p = np.zeros(3)
    for i in range(n):
        r = fr.p[i] - p_p
        a[i] = a_p + cross3(dw_p, r) + cross3(w_p, cross3(w_p, r))
        w[i] = w_p + fr.axis[i] * qdot[i]
        dw[i] = dw_p + fr.axis[i] * qddot[i] + cross3(w_p, fr.axis[i] * qdot[i])
        w_p, dw_p, a_p, p_p = w[i], dw[i], a[i], fr.p[i]
    return w, dw, a


def jacobian_dot_times_qdot(model: RobotModel, q, qdot,
                            frames: ChainFrames | None = None) -> np.ndarray:
    """Drift acceleration J̇q̇ (6-vector) of the end-effector frame."""
    fr = frames or chain_frames(model, q)
    qdot = _check_q(model, qdot, "qdot")
    w, dw, a = _forward_recursion(model, fr, qdot, np.zeros(model.n), np.zeros(3))
    r = fr.p_ee - fr.p[-1]
    a_ee = a[-1] + cross3(dw[-1], r) + cross3(w[-1], cross3(w[-1], r))
    return np.concatenate([a_ee, dw[-1]])


def mass_matrix(model: RobotModel, q, frames: ChainFrames | None = None) -> np.ndarray:
    """Joint-space inertia matrix, assembled from per-link CoM Jacobians."""
    fr = frames or chain_frames(model, q)
    n = model.n
    M = np.zeros((n, n))
    for i, joint in enumerate(model.joints):
        c = fr.p[i] + fr.R[i] @ joint.link.com
        k = i + 1
        Jv = np.zeros((3, n))
        Jv[:, :k] = cross3(fr.axis[:k], c - fr.p[:k]).T
        Jw = np.zeros((3, n))
        Jw[:, :k] = fr.axis[:k].T
        Iw = fr.R[i] @ joint.link.inertia @ fr.R[i].T
        M += joint.link.mass * (Jv.T @ Jv) + Jw.T @ (Iw @ Jw)
    return M


def rnea(model: RobotModel, q, qdot, qddot, gravity=None,
         frames: ChainFrames | None = None) -> np.ndarray:
    """Recursive Newton-Euler: joint torques for a prescribed motion.

    Gravity is handled by seeding the base with acceleration -g, so the
    returned torque is M(q)q̈ + N(q, q̇) including the gravity load.
    """
    fr = frames or chain_frames(model, q)
    qdot = _check_q(model, qdot, "qdot")
    qddot = _check_q(model, qddot, "qddot")
    g = model.gravity if gravity is None else np.asarray(gravity, dtype=float)
    n = model.n
    w, dw, a = _forward_recursion(model, fr, qdot, qddot, -g)

    F = np.empty((n, 3))
    T = np.empty((n, 3))
    c = np.empty((n, 3))
    for i, joint in enumerate(model.joints):
        rc = fr.R[i] @ joint.link.com
        c[i] = fr.p[i] + rc
        ac = a[i] + cross3(dw[i], rc) + cross3(w[i], cross3(w[i], rc))
        F[i] = joint.link.mass * ac
        Iw = fr.R[i] @ joint.link.inertia @ fr.R[i].T
        T[i] = Iw @ dw[i] + cross3(w[i], Iw @ w[i])

    tau = np.empty(n)
    f_next = np.zeros(3)
    t_next = np.zeros(3)
    p_next = np.zeros(3)
    for i in range(n - 1, -1, -1):
        f_i = F[i] + f_next
        t_i = (T[i] + cross3(c[i] - fr.p[i], F[i])
               + t_next + cross3(p_next - fr.p[i], f_next))
        tau[i] = fr.axis[i] @ t_i
        f_next, t_next, p_next = f_i, t_i, fr.p[i]
    return tau


def nonlinear_terms(model: RobotModel, q, qdot, gravity=None,
                    frames: ChainFrames | None = None) -> np.ndarray:
    """Coriolis, centrifugal and gravity torques N(q, q̇)."""
    return rnea(model, q, qdot, np.zeros(model.n), gravity, frames)


def inverse_dynamics(model: RobotModel, q, qdot, qddot, f_ext=None,
                     contact_jacobian=None, frames: ChainFrames | None = None) -> np.ndarray:
    """Actuation torque τ = M q̈ + N − J_cᵀ f for a prescribed motion.

    ``f_ext`` is the 6-wrench applied to the robot at the contact; when it is
    None (pre-grasp) no contact term enters.  ``contact_jacobian`` defaults to
    the end-effector Jacobian.
    """
    fr = frames or chain_frames(model, q)
    tau = rnea(model, q, qdot, qddot, None, fr)
    if f_ext is not None:
        f = np.asarray(f_ext, dtype=float).reshape(6)
        Jc = jacobian(model, q, fr) if contact_jacobian is None else np.asarray(contact_jacobian)
        tau = tau - Jc.T @ f
    return tau


class ArmKinematics:
    """Per-cycle cache: evaluates the chain once and derives everything from it.

    The control loop needs the pose, Jacobian, drift acceleration, inertia
    matrix and bias torque at the same (q, q̇) every cycle; this computes the
    frame sweep once and shares it.
    """

    def __init__(self, model: RobotModel):
        self.model = model
        self.frames: ChainFrames | None = None
        self.pose: Pose | None = None
        self.J = None
        self.jdot_qdot = None
        self.M = None
        self.N = None

    def update(self, q, qdot):
        m = self.model
        fr = chain_frames(m, q)
        self.frames = fr
        self.pose = forward_kinematics(m, q, fr)
        self.J = jacobian(m, q, fr)
        self.jdot_qdot = jacobian_dot_times_qdot(m, q, qdot, fr)
        self.M = mass_matrix(m, q, fr)
        self.N = nonlinear_terms(m, q, qdot, None, fr)
        return self
