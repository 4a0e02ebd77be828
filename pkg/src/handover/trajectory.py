"""Synthetic hand/object motion: min-jerk segments with live re-planning.

The hand carrying the object follows minimum-jerk reaches between poses —
the standard smooth model for human point-to-point motion.  Orientation
follows the shortest geodesic with the same quintic time scaling, so the
full state (pose, twist, acceleration) is analytic everywhere inside a
segment.  Mid-run events re-plan the remainder: a retarget starts a fresh
reach from wherever the hand is right now (position-continuous, restarting
from rest), an abort reaches back to the initial pose.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .geometry import (
    Pose,
    quat_axis_angle,
    quat_conjugate,
    quat_from_axis_angle,
    quat_product,
)
from .observer import FullState


def min_jerk(s0, s1, T: float, t: float):
    """Quintic 10τ³ − 15τ⁴ + 6τ⁵ interpolation with rest-to-rest boundaries.

    Returns (position, velocity, acceleration); t is clamped to [0, T].
    Works elementwise for array-valued endpoints.
    """
    if T <= 0.0:
        raise ValueError("segment duration must be positive")
    tau = min(max(t / T, 0.0), 1.0)
    s = tau**3 * (10.0 - 15.0 * tau + 6.0 * tau * tau)
    ds = tau**2 * (30.0 - 60.0 * tau + 30.0 * tau * tau) / T
    dds = tau * (60.0 - 180.0 * tau + 120.0 * tau * tau) / T**2
    s0 = np.asarray(s0, dtype=float)
    span = np.asarray(s1, dtype=float) - s0
    return s0 + span * s, span * ds, span * dds


@dataclass
class Segment:
    t0: float
    duration: float
    start: Pose
    goal: Pose
    axis: np.ndarray = field(init=False)
    angle: float = field(init=False)

    def __post_init__(self):
        # shortest-arc rotation carrying start orientation onto the goal's
        delta = quat_product(self.goal.orientation,
                             quat_conjugate(self.start.orientation))
        self.axis, self.angle = quat_axis_angle(delta)

    @property
    def t1(self) -> float:
        return self.t0 + self.duration

    def state(self, t: float) -> FullState:
        pos, vel, acc = min_jerk(self.start.position, self.goal.position,
                                 self.duration, t - self.t0)
        s, ds, dds = min_jerk(0.0, 1.0, self.duration, t - self.t0)
        quat = quat_product(quat_from_axis_angle(self.axis, self.angle * s),
                            self.start.orientation)
        omega = self.axis * (self.angle * ds)
        domega = self.axis * (self.angle * dds)
        return FullState(Pose(pos, quat),
                         np.concatenate([vel, omega]),
                         np.concatenate([acc, domega]))


@dataclass
class Retarget:
    """Re-plan the rest of the motion toward a new goal from time `time` on."""

    time: float
    goal: Pose
    duration: float


@dataclass
class Abort:
    """Re-plan back to the initial pose from time `time` on."""

    time: float
    duration: float


class HandMotion:
    """Piecewise min-jerk pose trajectory with event-driven re-planning."""

    def __init__(self, start: Pose, legs, events=()):
        """
        Args:
            start: initial pose.
            legs: iterable of (goal: Pose, duration: s); each leg starts where
                the previous ended, from rest.
            events: Retarget / Abort instances, applied in time order; an
                event discards the remainder of the plan.
        """
        self.initial = start.copy()
        self.segments: list[Segment] = []
        t0 = 0.0
        pose = start
        for goal, duration in legs:
            seg = Segment(t0, float(duration), pose.copy(), goal.copy())
            self.segments.append(seg)
            t0 = seg.t1
            pose = goal
        for ev in sorted(events, key=lambda e: e.time):
            if isinstance(ev, Retarget):
                self.retarget(ev.time, ev.goal, ev.duration)
            elif isinstance(ev, Abort):
                self.retarget(ev.time, self.initial, ev.duration)
            else:
                raise TypeError(f"unknown event {ev!r}")

    def state(self, t: float) -> FullState:
        # last segment that has started owns t; a re-planned segment starting
        # mid-flight of an older one therefore shadows its remainder
        active = None
        for seg in self.segments:
            if seg.t0 <= t:
                active = seg
            else:
                break
        if active is None:
            pose = self.segments[0].start if self.segments else self.initial
            return FullState(pose.copy())
        return active.state(t)

    def retarget(self, t: float, goal: Pose, duration: float):
        """Cut the plan at time t and reach for `goal` from the current pose."""
        here = self.state(t).pose
        self.segments = [s for s in self.segments if s.t0 < t]
        self.segments.append(Segment(float(t), float(duration), here, goal.copy()))

    @property
    def end_time(self) -> float:
        return self.segments[-1].t1 if self.segments else 0.0
