"""Joint-space posture task: lowest-priority PD pull toward a reference pose.

Resolves whatever redundancy the higher-weighted tasks leave over; in the
weighted QP its error is only kept bounded, not driven to zero.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class PostureGains:
    k_s: np.ndarray
    k_d: np.ndarray
    q_ref: np.ndarray

    def __post_init__(self):
        self.k_s = np.asarray(self.k_s, dtype=float).reshape(-1)
        self.k_d = np.asarray(self.k_d, dtype=float).reshape(-1)
        self.q_ref = np.asarray(self.q_ref, dtype=float).reshape(-1)
        if not (self.k_s.shape == self.k_d.shape == self.q_ref.shape):
            raise ValueError("posture gain dimensions differ")
        if np.any(self.k_s <= 0.0) or np.any(self.k_d <= 0.0):
            raise ValueError("posture gains must be strictly positive")

    @classmethod
    def default(cls, q_ref) -> "PostureGains":
        # Just enough to damp the nullspace and keep q loosely centered.  The
        # task competes with tracking at a 1:100 weight ratio, but its pull
        # still reaches the end-effector through J^+: a unit spring drags a
        # distant target centimeters off at steady state, and heavy damping
        # adds a velocity-proportional chase lag.  Keep both small.
        q_ref = np.asarray(q_ref, dtype=float).reshape(-1)
        n = q_ref.shape[0]
        return cls(0.01 * np.ones(n), 0.5 * np.ones(n), q_ref)


def posture_residual(q, qdot, gains: PostureGains, layout):
    """Affine residual (E, F): identity on the q̈ block, PD feedback in F."""
    q = np.asarray(q, dtype=float).reshape(-1)
    qdot = np.asarray(qdot, dtype=float).reshape(-1)
    n = gains.q_ref.shape[0]
    if q.shape[0] != n or qdot.shape[0] != n:
        raise ValueError("posture state dimension mismatch")
    E = np.zeros((n, layout.dim))
    E[:, layout.qdd] = np.eye(n)
    F = gains.k_s * (q - gains.q_ref) + gains.k_d * qdot
    return E, F


def posture_error(q, gains: PostureGains) -> np.ndarray:
    return np.asarray(q, dtype=float).reshape(-1) - gains.q_ref


def closed_loop_matrix(gains: PostureGains) -> np.ndarray:
    n = gains.q_ref.shape[0]
    A = np.zeros((2 * n, 2 * n))
    A[:n, n:] = np.eye(n)
    A[n:, :n] = -np.diag(gains.k_s)
    A[n:, n:] = -np.diag(gains.k_d)
    return A
