"""One control cycle: task assembly, constraint assembly, QP solve, torque.

The controller owns no integration state of its own — it maps the current
(q, q̇, observer error state, grasp frame state) to the optimal joint
acceleration, observer acceleration and contact wrench, plus the torque that
realizes the joint acceleration.  On solver failure it commands zero
acceleration (the arm coasts to a stop through its own damping tasks) and
flags the cycle.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .constraints import (
    CollisionParams,
    DEFAULT_HORIZON,
    LinkSphere,
    Sphere,
    collision_constraint,
    joint_limit_constraints,
)
from .observer import ObserverGains, ObserverState
from .posture import PostureGains, posture_residual
from .qp import (
    REGULARIZATION,
    ConstraintSet,
    DecisionLayout,
    TaskBlock,
    observation_task_block,
    solve_qp,
)
from .robot import ArmKinematics, RobotModel
from .tracking import GraspSpec, TrackingGains, tracking_task_residual

log = logging.getLogger("handover.controller")


@dataclass
class TaskWeights:
    observation: float = 1000.0
    tracking: float = 100.0
    posture: float = 1.0


@dataclass
class ControllerConfig:
    observer_gains: ObserverGains
    tracking_gains: TrackingGains
    posture_gains: PostureGains
    weights: TaskWeights = field(default_factory=TaskWeights)
    dt: float = 1e-3
    horizon: float = DEFAULT_HORIZON
    regularization: float = REGULARIZATION
    collision_pairs: list = field(default_factory=list)   # [(LinkSphere, Sphere)]
    collision_params: CollisionParams = field(default_factory=CollisionParams)

    @classmethod
    def default(cls, q_ref) -> "ControllerConfig":
        return cls(ObserverGains.default(), TrackingGains.default(),
                   PostureGains.default(q_ref))


@dataclass
class CycleResult:
    qdd: np.ndarray
    obs_acc: np.ndarray
    wrench: np.ndarray
    tau: np.ndarray
    eta_tt: object
    solution: object
    failed: bool


class Controller:
    def __init__(self, model: RobotModel, config: ControllerConfig):
        self.model = model
        self.config = config
        self.layout = DecisionLayout(model.n)
        self.kin = ArmKinematics(model)

    def control_cycle(self, q, qdot, eta_obs: ObserverState,
                      s_grasp, grasp: GraspSpec) -> CycleResult:
        cfg = self.config
        lay = self.layout
        kin = self.kin.update(q, qdot)

        blocks = [observation_task_block(eta_obs, cfg.observer_gains, lay,
                                         cfg.weights.observation)]
        E_tt, F_tt, eta_tt = tracking_task_residual(
            self.model, q, qdot, s_grasp, cfg.tracking_gains, lay,
            grasp.mask, kin.frames)
        blocks.append(TaskBlock(E_tt, F_tt, cfg.weights.tracking, "tracking"))
        E_p, F_p = posture_residual(q, qdot, cfg.posture_gains, lay)
        blocks.append(TaskBlock(E_p, F_p, cfg.weights.posture, "posture"))

        cons = joint_limit_constraints(self.model, q, qdot, cfg.dt, lay,
                                       cfg.horizon, kin.M, kin.N, kin.J)
        # pre-grasp: no contact wrench
        cons = cons.pin(lay.wrench, 0.0)
        for sphere_a, sphere_b in cfg.collision_pairs:
            out = collision_constraint(sphere_a, sphere_b, self.model, q, qdot,
                                       cfg.dt, lay, cfg.collision_params,
                                       kin.frames)
            if out is not None:
                cons = cons.with_rows(out[0], [out[1]])

        sol = solve_qp(blocks, cons, cfg.regularization)
        if sol.ok:
            qdd = sol.x[lay.qdd]
            obs_acc = sol.x[lay.obs_acc]
            wrench = sol.x[lay.wrench]
            failed = False
        else:
            log.warning("QP %s at cycle (violation %.3e, row %d); commanding "
                        "zero acceleration", sol.status, sol.max_violation,
                        sol.most_violated)
            qdd = np.zeros(self.model.n)
            obs_acc = -(cfg.observer_gains.k_s * eta_obs.error
                        + cfg.observer_gains.k_d * eta_obs.error_rate)
            wrench = np.zeros(6)
            failed = True
        tau = kin.M @ qdd + kin.N - kin.J.T @ wrench
        return CycleResult(qdd, obs_acc, wrench, tau, eta_tt, sol, failed)
