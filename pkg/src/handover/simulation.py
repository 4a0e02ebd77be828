"""Closed-loop handover simulation at a fixed 1 ms step.

Each cycle: sample the pose sensor (60 Hz ticks against the analytic hand
motion), form the observation error from the held measurement, propagate the
grasp frame from the observer state, run one controller cycle, then integrate
the observer with the QP-optimal observer acceleration and the arm with the
commanded joint acceleration.  Everything is deterministic given the scenario
seed; identical runs produce byte-identical CSV exports.

CSV column order (one row per cycle): t, q*, qd*, qdd*, tau* (n each),
obj_p(3)+obj_q(4), obs_p(3)+obs_q(4), obs twist v(3)+w(3), obs accel a(3)+aw(3),
grasp_p(3)+grasp_q(4), ee_p(3)+ee_q(4), ee twist v(3)+w(3), eta_obs(12),
eta_tt(12), status.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from .controller import Controller, ControllerConfig, TaskWeights
from .geometry import Pose, quat_geodesic_angle
from .observer import FullState, integrate_observer, observer_error_state
from .robot import JointState, RobotModel, bundled_model, load_model
from .sensor import SensorModel, SensorSim
from .tracking import GraspSpec, grasp_frame_state
from .trajectory import Abort, HandMotion, Retarget

log = logging.getLogger("handover.simulation")


class ScenarioError(ValueError):
    """Scenario file failed validation; message names the offending field."""


@dataclass
class MeetSpec:
    """Thresholds declaring giver and receiver to have met."""

    position: float = 0.005          # m
    orientation: float = np.deg2rad(3.0)
    sustain: float = 0.1             # s both conditions must hold


@dataclass
class Scenario:
    model: RobotModel
    initial: JointState
    grasp: GraspSpec
    hand: HandMotion
    sensor: SensorModel
    config: ControllerConfig
    mode: str = "giver"
    duration: float = 5.0
    seed: int = 0
    name: str = ""
    meet: MeetSpec = field(default_factory=MeetSpec)
    actuator_lag: float = 0.0        # s; 0 = ideal acceleration tracking

    def __post_init__(self):
        if self.mode not in ("giver", "receiver"):
            raise ScenarioError(f"mode: expected giver|receiver, got {self.mode!r}")
        if self.duration <= 0.0:
            raise ScenarioError("duration: must be positive")


def step_arm(model: RobotModel, q, qdot, qdd, dt: float) -> JointState:
    """Semi-implicit Euler: velocity first, then position with the new velocity."""
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    qdot = np.asarray(qdot, dtype=float) + np.asarray(qdd, dtype=float) * dt
    q = np.asarray(q, dtype=float) + qdot * dt
    return JointState(q, qdot)


class ActuatorLag:
    """First-order lag on the commanded acceleration (implicit-Euler filter)."""

    def __init__(self, time_constant: float, n: int):
        self.time_constant = float(time_constant)
        self.y = np.zeros(n)

    def apply(self, qdd, dt: float) -> np.ndarray:
        alpha = dt / (self.time_constant + dt)   # 1.0 when ideal
        self.y = self.y + alpha * (np.asarray(qdd, dtype=float) - self.y)
        return self.y


@dataclass
class RunLog:
    """Fixed-rate cycle records plus end-of-run summary metrics."""

    n: int
    time: np.ndarray
    q: np.ndarray
    qdot: np.ndarray
    qdd: np.ndarray
    tau: np.ndarray
    obj: np.ndarray        # (cycles, 7) position + wxyz quaternion
    obs: np.ndarray        # (cycles, 7)
    obs_twist: np.ndarray  # (cycles, 6)
    obs_accel: np.ndarray  # (cycles, 6)
    grasp: np.ndarray      # (cycles, 7)
    ee: np.ndarray         # (cycles, 7)
    ee_twist: np.ndarray   # (cycles, 6)
    eta_obs: np.ndarray    # (cycles, 12)
    eta_tt: np.ndarray     # (cycles, 12)
    status: list
    metrics: dict = field(default_factory=dict)

    @classmethod
    def empty(cls, n: int, cycles: int) -> "RunLog":
        z = lambda w: np.zeros((cycles, w))
        return cls(n, np.zeros(cycles), z(n), z(n), z(n), z(n), z(7), z(7),
                   z(6), z(6), z(7), z(7), z(6), z(12), z(12), [""] * cycles)

    @property
    def cycles(self) -> int:
        return self.time.shape[0]

    def header(self) -> list[str]:
        cols = ["t"]
        for tag in ("q", "qd", "qdd", "tau"):
            cols += [f"{tag}{i}" for i in range(self.n)]
        for tag in ("obj", "obs"):
            cols += [f"{tag}_{c}" for c in ("px", "py", "pz", "qw", "qx", "qy", "qz")]
        cols += [f"obs_{c}" for c in ("vx", "vy", "vz", "wx", "wy", "wz")]
        cols += [f"obs_{c}" for c in ("ax", "ay", "az", "awx", "awy", "awz")]
        for tag in ("grasp", "ee"):
            cols += [f"{tag}_{c}" for c in ("px", "py", "pz", "qw", "qx", "qy", "qz")]
        cols += [f"ee_{c}" for c in ("vx", "vy", "vz", "wx", "wy", "wz")]
        cols += [f"eta_obs_{i}" for i in range(12)]
        cols += [f"eta_tt_{i}" for i in range(12)]
        cols.append("status")
        return cols

    def row(self, i: int) -> np.ndarray:
        return np.concatenate([
            [self.time[i]], self.q[i], self.qdot[i], self.qdd[i], self.tau[i],
            self.obj[i], self.obs[i], self.obs_twist[i], self.obs_accel[i],
            self.grasp[i], self.ee[i], self.ee_twist[i],
            self.eta_obs[i], self.eta_tt[i],
        ])

    def to_csv(self, path):
        with open(path, "w") as fh:
            fh.write(",".join(self.header()) + "\n")
            for i in range(self.cycles):
                vals = [repr(float(v)) for v in self.row(i)]
                vals.append(self.status[i])
                fh.write(",".join(vals) + "\n")

    def metrics_json(self, path):
        with open(path, "w") as fh:
            json.dump(self.metrics, fh, indent=2, sort_keys=True)
            fh.write("\n")


def load_runlog_csv(path) -> RunLog:
    """Exact read-back of a to_csv export (used by replay and tests)."""
    with open(path) as fh:
        header = fh.readline().rstrip("\n").split(",")
        rows = []
        status = []
        for lineno, line in enumerate(fh, start=2):
            parts = line.rstrip("\n").split(",")
            if len(parts) != len(header):
                raise ValueError(f"{path}: row {lineno} has {len(parts)} fields, "
                                 f"expected {len(header)}")
            try:
                rows.append([float(v) for v in parts[:-1]])
            except ValueError as exc:
                raise ValueError(f"{path}: row {lineno}: {exc}") from None
            status.append(parts[-1])
    n = sum(1 for c in header if c.startswith("q") and c[1:].isdigit())
    data = np.asarray(rows, dtype=float)
    out = RunLog.empty(n, data.shape[0])
    i = 0

    def take(width):
        nonlocal i
        block = data[:, i:i + width]
        i += width
        return block

    out.time = take(1).ravel()
    out.q, out.qdot, out.qdd, out.tau = (take(n) for _ in range(4))
    out.obj, out.obs = take(7), take(7)
    out.obs_twist, out.obs_accel = take(6), take(6)
    out.grasp, out.ee = take(7), take(7)
    out.ee_twist = take(6)
    out.eta_obs, out.eta_tt = take(12), take(12)
    out.status = status
    return out


def _pose7(pose: Pose) -> np.ndarray:
    return np.concatenate([pose.position, pose.orientation])


def _limit_violations(model: RobotModel, q, qdot, tau, tol=1e-6) -> bool:
    q_min, q_max, v_max, _, tau_max = model.limit_arrays()
    return bool(np.any(q < q_min - tol) or np.any(q > q_max + tol)
                or np.any(np.abs(qdot) > v_max + tol)
                or np.any(np.abs(tau) > tau_max + tol))


def run_scenario(scenario: Scenario,
                 commands: Optional[Callable[[], list]] = None,
                 telemetry: Optional[Callable[[str, dict], None]] = None,
                 pacer: Optional[Callable[[float], None]] = None) -> RunLog:
    """Run the closed loop and return the populated RunLog.

    ``commands``: drained once per cycle; each entry is a dict with a "kind"
    key ("retarget" {pose, duration}, "grasp_offset" {pose}, "abort"
    {duration}, "pause", "resume", "set_weights" {observation, tracking,
    posture}, "stop").  ``telemetry``: called as telemetry(kind, payload) with
    "state" every cycle and "event" on meet/solver failure/commands.
    ``pacer``: called with the simulation time after every cycle (real-time
    pacing hook for serve mode).
    """
    sc = scenario
    model = sc.model
    n = model.n
    dt = sc.config.dt
    cycles = int(round(sc.duration / dt))
    rl = RunLog.empty(n, cycles)

    ctl = Controller(model, sc.config)
    sensor = SensorSim(sc.sensor, sc.seed)
    lag = ActuatorLag(sc.actuator_lag, n) if sc.actuator_lag > 0.0 else None
    hand = sc.hand
    grasp = sc.grasp

    q = sc.initial.q.copy()
    qdot = sc.initial.qdot.copy()
    s_obs: Optional[FullState] = None
    x_held: Optional[Pose] = None

    meet_time = None
    meet_streak = 0
    sustain_cycles = max(int(round(sc.meet.sustain / dt)), 1)
    failures = 0
    violations = 0
    paused = False
    stopped = False
    last_state = None
    i = 0
    ee_prev = None
    path_len = 0.0
    ee_start = None
    ee_at_hol = None
    t_hol = hand.end_time

    def emit(kind, payload):
        if telemetry is not None:
            telemetry(kind, payload)

    while i < cycles and not stopped:
        t = i * dt
        if commands is not None:
            for cmd in commands():
                kind = cmd.get("kind")
                if kind == "retarget":
                    hand.retarget(t, cmd["pose"], cmd.get("duration", 0.5))
                    t_hol = hand.end_time
                    emit("event", {"event": "retarget", "t": t})
                elif kind == "abort":
                    hand.retarget(t, hand.initial, cmd.get("duration", 1.0))
                    t_hol = hand.end_time
                    emit("event", {"event": "abort", "t": t})
                elif kind == "grasp_offset":
                    grasp.local_pose = cmd["pose"]
                elif kind == "set_weights":
                    w = ctl.config.weights
                    ctl.config.weights = TaskWeights(
                        cmd.get("observation", w.observation),
                        cmd.get("tracking", w.tracking),
                        cmd.get("posture", w.posture))
                elif kind == "pause":
                    paused = True
                elif kind == "resume":
                    paused = False
                elif kind == "stop":
                    stopped = True
                else:
                    log.warning("unknown command %r ignored", kind)
        if stopped:
            break
        if paused:
            if last_state is not None:
                emit("state", last_state)   # t frozen while paused
            if pacer is not None:
                pacer(t)
            continue

        truth = hand.state(t)
        meas = sensor.sample(t, lambda tt: hand.state(tt).pose)
        if meas is not None:
            x_held = meas
            if s_obs is None:
                s_obs = FullState(meas.copy())   # observer starts on first fix
        # rate > 0 guarantees a tick at t = 0, so the observer is always seeded
        eta_obs = observer_error_state(s_obs, x_held)
        s_grasp = grasp_frame_state(s_obs, grasp)

        res = ctl.control_cycle(q, qdot, eta_obs, s_grasp, grasp)
        if res.failed:
            failures += 1
            emit("event", {"event": "solver-failure", "t": t,
                           "status": res.solution.status})

        ee_pose = ctl.kin.pose
        ee_twist = ctl.kin.J @ qdot

        rl.time[i] = t
        rl.q[i] = q
        rl.qdot[i] = qdot
        rl.qdd[i] = res.qdd
        rl.tau[i] = res.tau
        rl.obj[i] = _pose7(truth.pose)
        rl.obs[i] = _pose7(s_obs.pose)
        rl.obs_twist[i] = s_obs.twist
        rl.obs_accel[i] = s_obs.accel
        rl.grasp[i] = _pose7(s_grasp.pose)
        rl.ee[i] = _pose7(ee_pose)
        rl.ee_twist[i] = ee_twist
        rl.eta_obs[i] = eta_obs.vector
        rl.eta_tt[i] = res.eta_tt.vector
        rl.status[i] = res.solution.status

        if _limit_violations(model, q, qdot, res.tau):
            violations += 1

        # meet detection against the true grasp frame
        true_grasp = truth.pose.compose(grasp.local_pose)
        pos_err = float(np.linalg.norm(ee_pose.position - true_grasp.position))
        ang_err = quat_geodesic_angle(ee_pose.orientation, true_grasp.orientation)
        if pos_err < sc.meet.position and ang_err < sc.meet.orientation:
            meet_streak += 1
            if meet_streak == sustain_cycles and meet_time is None:
                meet_time = t - (sustain_cycles - 1) * dt
                emit("event", {"event": "meet", "t": meet_time})
        else:
            meet_streak = 0

        if ee_start is None:
            ee_start = ee_pose.position.copy()
        if ee_prev is not None:
            path_len += float(np.linalg.norm(ee_pose.position - ee_prev))
        ee_prev = ee_pose.position.copy()
        if ee_at_hol is None and t >= t_hol:
            ee_at_hol = ee_pose.position.copy()

        last_state = {
            "t": t, "q": q, "ee": ee_pose, "obj": truth.pose,
            "obs": s_obs.pose, "grasp": s_grasp.pose,
            "eta_obs": float(np.linalg.norm(eta_obs.error)),
            "eta_tt": float(np.linalg.norm(res.eta_tt.error)),
            "status": res.solution.status, "meet": meet_time,
        }
        emit("state", last_state)

        s_obs = integrate_observer(s_obs, res.obs_acc, dt)
        state = step_arm(model, q, qdot,
                         lag.apply(res.qdd, dt) if lag else res.qdd, dt)
        q, qdot = state.q, state.qdot
        if pacer is not None:
            pacer(t)
        i += 1

    done = i  # cycles actually simulated (early stop truncates)
    if done < cycles:
        rl = _truncate(rl, done)

    final_grasp = hand.state(done * dt).pose.compose(grasp.local_pose)
    if done:
        term_pos = float(np.linalg.norm(rl.ee[-1][:3] - final_grasp.position))
        term_ang = float(quat_geodesic_angle(rl.ee[-1][3:], final_grasp.orientation))
        if ee_at_hol is None:
            ee_at_hol = rl.ee[-1][:3]
    else:
        term_pos = term_ang = None
    proactivity = None
    if done and path_len > 0.0 and ee_at_hol is not None:
        proactivity = float(np.linalg.norm(ee_at_hol - ee_start) / path_len)

    rl.metrics = {
        "scenario": sc.name,
        "mode": sc.mode,
        "seed": sc.seed,
        "cycles": done,
        "duration": done * dt,
        "meet": meet_time is not None,
        "meet_time": meet_time,
        "terminal_position_error": term_pos,
        "terminal_orientation_error": term_ang,
        "peak_joint_speed": float(np.abs(rl.qdot).max()) if done else 0.0,
        "solver_failures": failures,
        "constraint_violations": violations,
        "ee_path_length": path_len,
        "proactivity": proactivity,
    }
    emit("metrics", rl.metrics)
    return rl


def _truncate(rl: RunLog, done: int) -> RunLog:
    out = RunLog.empty(rl.n, done)
    for name in ("time", "q", "qdot", "qdd", "tau", "obj", "obs", "obs_twist",
                 "obs_accel", "grasp", "ee", "ee_twist", "eta_obs", "eta_tt"):
        setattr(out, name, getattr(rl, name)[:done])
    out.status = rl.status[:done]
    return out


# ----------------------------------------------------------- scenario loading

def _get(obj: dict, key: str, where: str):
    if key not in obj:
        raise ScenarioError(f"{where}.{key}: missing")
    return obj[key]


def _pose_from(obj: dict, where: str) -> Pose:
    pos = np.asarray(_get(obj, "position", where), dtype=float)
    if pos.shape != (3,):
        raise ScenarioError(f"{where}.position: expected 3 numbers")
    if "orientation" in obj:
        quat = np.asarray(obj["orientation"], dtype=float)
        if quat.shape != (4,):
            raise ScenarioError(f"{where}.orientation: expected wxyz quaternion")
        return Pose(pos, quat)
    return Pose(pos)


def load_scenario(source) -> Scenario:
    """Build a Scenario from a dict, JSON string, or file path."""
    if isinstance(source, dict):
        raw = source
    else:
        text = (source if isinstance(source, str) and source.lstrip().startswith("{")
                else Path(source).read_text())
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ScenarioError(f"scenario JSON: {exc}") from None

    model_ref = raw.get("model", "panda7")
    model = bundled_model() if model_ref == "panda7" else load_model(model_ref)

    init = _get(raw, "initial", "scenario")
    q0 = np.asarray(_get(init, "q", "initial"), dtype=float)
    qd0 = np.asarray(init.get("qdot", np.zeros(model.n)), dtype=float)
    if q0.shape != (model.n,):
        raise ScenarioError(f"initial.q: expected {model.n} values")
    initial = JointState(q0, qd0)

    graw = raw.get("grasp", {})
    local = (_pose_from(graw["local_pose"], "grasp.local_pose")
             if "local_pose" in graw else Pose())
    grasp = GraspSpec(local, tuple(graw.get("mask", (True, True, True))))

    hraw = _get(raw, "hand", "scenario")
    start = _pose_from(_get(hraw, "start", "hand"), "hand.start")
    legs = []
    for k, leg in enumerate(hraw.get("legs", [])):
        where = f"hand.legs[{k}]"
        goal = _pose_from(_get(leg, "goal", where), f"{where}.goal")
        duration = float(_get(leg, "duration", where))
        if duration <= 0.0:
            raise ScenarioError(f"{where}.duration: must be positive")
        legs.append((goal, duration))
    events = []
    for k, ev in enumerate(hraw.get("events", [])):
        where = f"hand.events[{k}]"
        kind = _get(ev, "type", where)
        t_ev = float(_get(ev, "time", where))
        if kind == "retarget":
            events.append(Retarget(t_ev, _pose_from(_get(ev, "goal", where),
                                                    f"{where}.goal"),
                                   float(_get(ev, "duration", where))))
        elif kind == "abort":
            events.append(Abort(t_ev, float(_get(ev, "duration", where))))
        else:
            raise ScenarioError(f"{where}.type: unknown event {kind!r}")
    hand = HandMotion(start, legs, events)

    sraw = raw.get("sensor", {})
    calibration = (_pose_from(sraw["calibration"], "sensor.calibration")
                   if "calibration" in sraw else Pose())
    sensor = SensorModel(rate=float(sraw.get("rate", 60.0)),
                         latency=float(sraw.get("latency", 0.0)),
                         noise_pos=float(sraw.get("noise_pos", 0.0)),
                         noise_rot=float(sraw.get("noise_rot", 0.0)),
                         calibration=calibration)

    q_ref = np.asarray(raw.get("posture_ref", q0), dtype=float)
    config = ControllerConfig.default(q_ref)
    wraw = raw.get("weights")
    if wraw:
        config.weights = TaskWeights(float(wraw.get("observation", 1000.0)),
                                     float(wraw.get("tracking", 100.0)),
                                     float(wraw.get("posture", 1.0)))

    meet = MeetSpec()
    mraw = raw.get("meet", {})
    if "position" in mraw:
        meet.position = float(mraw["position"])
    if "orientation_deg" in mraw:
        meet.orientation = np.deg2rad(float(mraw["orientation_deg"]))
    if "sustain" in mraw:
        meet.sustain = float(mraw["sustain"])

    duration = float(raw.get("duration", 5.0))
    if duration <= hand.end_time:
        raise ScenarioError("duration: must exceed the hand motion "
                            f"({hand.end_time:g} s)")

    return Scenario(model=model, initial=initial, grasp=grasp, hand=hand,
                    sensor=sensor, config=config,
                    mode=raw.get("mode", "giver"), duration=duration,
                    seed=int(raw.get("seed", 0)), name=raw.get("name", ""),
                    meet=meet, actuator_lag=float(raw.get("actuator_lag", 0.0)))


def bundled_scenario(name: str) -> Scenario:
    """Load one of the packaged scenario files (s1..s4)."""
    from importlib import resources

    ref = resources.files("handover").joinpath(f"scenarios/{name}.json")
    if not ref.is_file():
        raise ScenarioError(f"no bundled scenario named {name!r}")
    return load_scenario(ref.read_text())
