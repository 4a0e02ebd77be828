"""Weighted multi-task QP over the stacked decision vector [q̈; α̇_obs; f].

All tasks enter as affine residuals wᵢ‖Eᵢχ + Fᵢ‖², summed into one strictly
convex objective (a fixed 1e-6‖χ‖² regularizer guarantees uniqueness), and
minimized subject to inequality rows Cχ ≤ d plus box bounds.

The solver is a dense dual active-set method: start at the unconstrained
minimum, repeatedly add the most violated constraint, taking dual steps that
drop blocking constraints when needed.  Problem sizes here are tiny (19
variables for a 7-DoF arm), so every inner step is a fresh dense solve —
simple, deterministic, and fast enough for the 1 ms budget.

Variables whose box bounds pin them to a single value (the contact wrench
before grasp) are eliminated before the solve and re-inserted afterwards, so
the active-set core never sees equality constraints.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .observer import ObserverGains, ObserverState

REGULARIZATION = 1e-6

STATUS_OPTIMAL = "optimal"
STATUS_MAX_ITER = "max-iter"
STATUS_INFEASIBLE = "infeasible"


@dataclass(frozen=True)
class DecisionLayout:
    """Index map of the decision vector: [q̈ (n); α̇_obs (6); wrench (6)]."""

    n_joints: int

    @property
    def dim(self) -> int:
        return self.n_joints + 12

    @property
    def qdd(self) -> slice:
        return slice(0, self.n_joints)

    @property
    def obs_acc(self) -> slice:
        return slice(self.n_joints, self.n_joints + 6)

    @property
    def wrench(self) -> slice:
        return slice(self.n_joints + 6, self.n_joints + 12)


@dataclass
class TaskBlock:
    E: np.ndarray
    F: np.ndarray
    weight: float
    name: str = ""

    def __post_init__(self):
        self.E = np.atleast_2d(np.asarray(self.E, dtype=float))
        self.F = np.asarray(self.F, dtype=float).reshape(-1)
        if self.E.shape[0] != self.F.shape[0]:
            raise ValueError(f"task {self.name or '?'}: E rows != F length")
        if self.weight <= 0.0:
            raise ValueError(f"task {self.name or '?'}: weight must be positive")

    def residual(self, x) -> np.ndarray:
        return self.E @ x + self.F


@dataclass
class ConstraintSet:
    """Inequality rows Cχ ≤ d plus box bounds lo ≤ χ ≤ hi (±inf allowed)."""

    C: np.ndarray
    d: np.ndarray
    lo: np.ndarray
    hi: np.ndarray

    @classmethod
    def empty(cls, dim: int) -> "ConstraintSet":
        return cls(np.zeros((0, dim)), np.zeros(0),
                   np.full(dim, -np.inf), np.full(dim, np.inf))

    def __post_init__(self):
        self.C = np.atleast_2d(np.asarray(self.C, dtype=float))
        self.d = np.asarray(self.d, dtype=float).reshape(-1)
        self.lo = np.asarray(self.lo, dtype=float).reshape(-1)
        self.hi = np.asarray(self.hi, dtype=float).reshape(-1)
        if self.C.shape[0] != self.d.shape[0]:
            raise ValueError("constraint rows and rhs differ in length")
        if np.any(self.lo > self.hi):
            raise ValueError("box bounds crossed (lo > hi)")

    def with_rows(self, C_new, d_new) -> "ConstraintSet":
        C_new = np.atleast_2d(np.asarray(C_new, dtype=float))
        if C_new.shape[0] == 0:
            return self
        return ConstraintSet(np.vstack([self.C, C_new]),
                             np.concatenate([self.d, np.atleast_1d(d_new)]),
                             self.lo, self.hi)

    def pin(self, idx, value) -> "ConstraintSet":
        lo = self.lo.copy()
        hi = self.hi.copy()
        lo[idx] = value
        hi[idx] = value
        return ConstraintSet(self.C, self.d, lo, hi)


@dataclass
class QpSolution:
    x: np.ndarray
    objective: float              # task objective, regularizer excluded
    iterations: int
    status: str
    mu_ineq: np.ndarray           # multipliers of the supplied C rows
    mu_lo: np.ndarray
    mu_hi: np.ndarray
    max_violation: float
    most_violated: int = -1       # row index when infeasible

    @property
    def ok(self) -> bool:
        return self.status == STATUS_OPTIMAL


def observation_task_block(eta: ObserverState, gains: ObserverGains,
                           layout: DecisionLayout, weight: float = 1000.0) -> TaskBlock:
    """Observation task: pull α̇_obs toward the PD feedback on the pose error."""
    E = np.zeros((6, layout.dim))
    E[:, layout.obs_acc] = np.eye(6)
    F = gains.k_s * eta.error + gains.k_d * eta.error_rate
    return TaskBlock(E, F, weight, "observation")


def _assemble(blocks, dim, reg):
    G = 2.0 * reg * np.eye(dim)
    a = np.zeros(dim)
    for b in blocks:
        if b.E.shape[1] != dim:
            raise ValueError(f"task {b.name or '?'}: E has {b.E.shape[1]} columns, expected {dim}")
        G += 2.0 * b.weight * (b.E.T @ b.E)
        a += 2.0 * b.weight * (b.E.T @ b.F)
    return G, a


def task_objective(blocks, x) -> float:
    return float(sum(b.weight * float(np.dot(b.residual(x), b.residual(x)))
                     for b in blocks))


def solve_qp(blocks, constraints: ConstraintSet | None = None,
             reg: float = REGULARIZATION, max_iter: int | None = None) -> QpSolution:
    """Minimize Σ wᵢ‖Eᵢχ+Fᵢ‖² + reg‖χ‖² subject to Cχ ≤ d, lo ≤ χ ≤ hi."""
    blocks = list(blocks)
    if not blocks:
        raise ValueError("at least one task block required")
    dim = blocks[0].E.shape[1]
    cons = constraints if constraints is not None else ConstraintSet.empty(dim)
    G, a = _assemble(blocks, dim, reg)

    # eliminate variables pinned by their box bounds
    pinned = cons.lo == cons.hi
    free = ~pinned
    x_pin = np.where(pinned, cons.lo, 0.0)
    nf = int(np.count_nonzero(free))
    Gf = G[np.ix_(free, free)]
    af = a[free] + G[np.ix_(free, pinned)] @ x_pin[pinned]

    # stack the inequality rows in documented order: user rows, upper bounds,
    # lower bounds (free variables with finite bounds only)
    k_user = cons.C.shape[0]
    rows = [cons.C[:, free]]
    rhs = [cons.d - cons.C[:, pinned] @ x_pin[pinned]]
    eye_f = np.eye(nf)
    free_idx = np.flatnonzero(free)
    hi_rows = np.flatnonzero(np.isfinite(cons.hi[free]))
    lo_rows = np.flatnonzero(np.isfinite(cons.lo[free]))
    rows.append(eye_f[hi_rows])
    rhs.append(cons.hi[free][hi_rows])
    rows.append(-eye_f[lo_rows])
    rhs.append(-cons.lo[free][lo_rows])
    C = np.vstack(rows)
    d = np.concatenate(rhs)
    k_total = C.shape[0]

    if max_iter is None:
        max_iter = 10 * dim

    x, u, active, status, iters, worst = _dual_active_set(Gf, af, C, d, max_iter)

    # unfold multipliers back onto the caller's structures
    mu_ineq = u[:k_user]
    mu_hi = np.zeros(dim)
    mu_lo = np.zeros(dim)
    mu_hi[free_idx[hi_rows]] = u[k_user:k_user + hi_rows.size]
    mu_lo[free_idx[lo_rows]] = u[k_user + hi_rows.size:]

    x_full = x_pin.copy()
    x_full[free] = x
    violation = float(np.max(C @ x - d, initial=0.0))
    return QpSolution(x_full, task_objective(blocks, x_full), iters, status,
                      mu_ineq, mu_lo, mu_hi, violation, worst)


def _dual_active_set(G, a, C, d, max_iter, tol=1e-9):
    """Dual active-set core: returns (x, multipliers, active list, status, iters, worst_row).

    Maintains stationarity G x + a + Σ u_i c_i = 0 with u ≥ 0 throughout and
    works violated primal constraints in one at a time.
    """
    k = C.shape[0]
    u = np.zeros(k)
    x = np.linalg.solve(G, -a)
    if k == 0:
        return x, u, [], STATUS_OPTIMAL, 0, -1
    active: list[int] = []
    iters = 0
    scale = 1.0 + float(np.max(np.abs(d), initial=0.0))

    while True:
        s = C @ x - d
        p = int(np.argmax(s))
        if s[p] <= tol * scale:
            return x, u, active, STATUS_OPTIMAL, iters, -1
        cp = C[p]
        # work constraint p until satisfied or shown incompatible
        while True:
            iters += 1
            if iters > max_iter:
                return x, u, active, STATUS_MAX_ITER, iters, p
            Gi_cp = np.linalg.solve(G, cp)
            if active:
                N = C[active].T
                Gi_N = np.linalg.solve(G, N)
                S = N.T @ Gi_N
                r = -np.linalg.solve(S, N.T @ Gi_cp)
                z = Gi_cp + Gi_N @ r
            else:
                r = np.zeros(0)
                z = Gi_cp
            curvature = float(cp @ z)      # equals zᵀGz ≥ 0
            viol = float(cp @ x - d[p])
            if curvature > 1e-12:
                t2 = viol / curvature
            else:
                t2 = np.inf                 # pure dual step needed
            # blocking active constraints: multipliers driven toward zero
            t1 = np.inf
            blocker = -1
            for j, idx in enumerate(active):
                if r[j] < -1e-14:
                    tj = u[idx] / -r[j]
                    if tj < t1 - 1e-15:
                        t1 = tj
                        blocker = j
            if not np.isfinite(t2) and not np.isfinite(t1):
                return x, u, active, STATUS_INFEASIBLE, iters, p
            t = min(t1, t2)
            x = x - t * z
            if active:
                u[active] += t * r
            u[p] += t
            if t2 <= t1:
                active.append(p)
                break
            dropped = active.pop(blocker)
            u[dropped] = 0.0
