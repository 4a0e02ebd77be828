"""Simulated pose sensor: fixed-rate sampling, latency, noise, miscalibration.

The tracker runs slower than the control loop (60 Hz vs 1 kHz), reports the
pose the object had `latency` seconds ago, corrupts it with bounded uniform
noise, and sees everything through a rigid calibration offset.  The sampler
is stateful: tick k fires at the first query time t >= k / rate, so a 1 kHz
loop over [0, 1) yields exactly `rate` measurements.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .geometry import Pose, quat_from_axis_angle, quat_product


@dataclass
class SensorModel:
    rate: float = 60.0            # samples per second
    latency: float = 0.0          # age of each reported pose, s
    noise_pos: float = 0.0        # uniform position noise bound, m (per axis)
    noise_rot: float = 0.0        # uniform rotation noise bound, rad
    calibration: Pose = field(default_factory=Pose.identity)

    def __post_init__(self):
        if self.rate <= 0.0:
            raise ValueError("sensor rate must be positive")
        if self.latency < 0.0:
            raise ValueError("sensor latency must be non-negative")


def apply_calibration(model: SensorModel, pose: Pose) -> Pose:
    return model.calibration.compose(pose)


def remove_calibration(model: SensorModel, measured: Pose) -> Pose:
    return model.calibration.inverse().compose(measured)


class SensorSim:
    """Stateful sampler over an analytic ground-truth pose trajectory."""

    def __init__(self, model: SensorModel, seed: int = 0):
        self.model = model
        self.rng = np.random.default_rng(seed)
        self.next_tick = 0

    def sample(self, t: float, truth_of_t: Callable[[float], Pose]) -> Optional[Pose]:
        """Return a measurement if a sample tick falls at or before t, else None."""
        m = self.model
        due = self.next_tick / m.rate
        if t + 1e-9 < due:
            return None
        self.next_tick += 1
        truth = truth_of_t(max(due - m.latency, 0.0))
        measured = apply_calibration(m, truth)
        pos = measured.position
        quat = measured.orientation
        # fixed draw order keeps streams reproducible across configs
        if m.noise_pos > 0.0:
            pos = pos + self.rng.uniform(-m.noise_pos, m.noise_pos, 3)
        if m.noise_rot > 0.0:
            axis = self.rng.standard_normal(3)
            axis /= np.linalg.norm(axis)
            angle = self.rng.uniform(-m.noise_rot, m.noise_rot)
            quat = quat_product(quat_from_axis_angle(axis, angle), quat)
        return Pose(pos, quat)
