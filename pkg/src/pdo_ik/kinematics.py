"""Distance-parameterized kinematics and the propagative forward rollout.

A revolute angle theta in [0, pi] is replaced by the squared distance
``L = 1 - cos(theta)`` in [0, 2]; ``sin(theta) = sqrt(2L - L^2)``.  Joints with
wider ranges are split into sub-angles, each carried by its own ``L``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .robot import DecompositionPlan, DHRow, RobotModel

# g_derivative clamps L into [L_EPS, 2 - L_EPS] to keep (2L - L^2)^-1/2 finite.
L_EPS = 1e-9


class DomainError(ValueError):
    """Input outside the domain of a kinematic map."""


# --------------------------------------------------------------------------
# squashing


def sigmoid(omega):
    omega = np.asarray(omega, dtype=float)
    e = np.exp(-np.abs(omega))
    out = np.where(omega >= 0, 1.0 / (1.0 + e), e / (1.0 + e))
    return out if out.ndim else float(out)


def squash(omega, L_min, L_max):
    """Map an unconstrained slack into the open interval (L_min, L_max)."""
    lo = np.asarray(L_min, dtype=float)
    hi = np.asarray(L_max, dtype=float)
    L = (hi - lo) * sigmoid(omega) + lo
    # float64 saturates sigma for |omega| > ~37; keep the interval open.
    L = np.minimum(np.maximum(L, np.nextafter(lo, np.inf)), np.nextafter(hi, -np.inf))
    return L if np.ndim(L) else float(L)


def squash_derivative(omega, L_min, L_max):
    s = sigmoid(omega)
    out = (np.asarray(L_max, dtype=float) - np.asarray(L_min, dtype=float)) * s * (1.0 - s)
    return out if np.ndim(out) else float(out)


def unsquash(L, L_min, L_max):
    """Inverse of :func:`squash`; diverges at the interval ends."""
    p = (np.asarray(L, dtype=float) - L_min) / (np.asarray(L_max, dtype=float) - L_min)
    if np.any(p <= 0.0) or np.any(p >= 1.0):
        raise DomainError("value must lie strictly inside the squashing interval")
    out = np.log(p) - np.log1p(-p)
    return out if np.ndim(out) else float(out)


def distance_from_angle(theta):
    """``1 - cos(theta)`` evaluated as ``2 sin^2(theta/2)`` (no cancellation near 0)."""
    s = np.sin(0.5 * np.asarray(theta, dtype=float))
    out = 2.0 * s * s
    return out if np.ndim(out) else float(out)


# --------------------------------------------------------------------------
# local transforms


def rot_z(angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    T = np.eye(4)
    T[0, 0], T[0, 1], T[1, 0], T[1, 1] = c, -s, s, c
    return T


def _dh_from_cs(c: float, s: float, dh: DHRow) -> np.ndarray:
    ca, sa = math.cos(dh.alpha), math.sin(dh.alpha)
    return np.array(
        [
            [c, -s, 0.0, dh.a],
            [s * ca, c * ca, -sa, -dh.d * sa],
            [s * sa, c * sa, ca, dh.d * ca],
            [0.0, 0.0, 0.0, 1.0],
        ]
    )


def dh_transform(theta: float, dh: DHRow) -> np.ndarray:
    """Modified-DH transform from trigonometric joint angle."""
    return _dh_from_cs(math.cos(theta), math.sin(theta), dh)


def dh_derivative(theta: float, dh: DHRow) -> np.ndarray:
    """d/dtheta of :func:`dh_transform`."""
    c, s = math.cos(theta), math.sin(theta)
    ca, sa = math.cos(dh.alpha), math.sin(dh.alpha)
    return np.array(
        [
            [-s, -c, 0.0, 0.0],
            [c * ca, -s * ca, 0.0, 0.0],
            [c * sa, -s * sa, 0.0, 0.0],
            [0.0, 0.0, 0.0, 0.0],
        ]
    )


def g_transform(L: float, dh: DHRow) -> np.ndarray:
    """Modified-DH transform with the joint angle replaced by a squared distance."""
    if not 0.0 <= L <= 2.0:
        raise DomainError(f"squared distance {L!r} outside [0, 2]")
    return _dh_from_cs(1.0 - L, math.sqrt(max(L * (2.0 - L), 0.0)), dh)


def g_derivative(L: float, dh: DHRow) -> np.ndarray:
    L = min(max(L, L_EPS), 2.0 - L_EPS)
    t = (1.0 - L) / math.sqrt(L * (2.0 - L))
    ca, sa = math.cos(dh.alpha), math.sin(dh.alpha)
    return np.array(
        [
            [-1.0, -t, 0.0, 0.0],
            [ca * t, -ca, 0.0, 0.0],
            [sa * t, -sa, 0.0, 0.0],
            [0.0, 0.0, 0.0, 0.0],
        ]
    )


_ZERO_DH = DHRow(0.0, 0.0, 0.0)


def factor_dh(model: RobotModel, plan: DecompositionPlan, k: int) -> DHRow:
    """DH row of slack ``k``'s factor: the joint's DH on its first sub-angle, zero after."""
    i = int(plan.slack_joint[k])
    return model.joints[i].dh if k == plan.starts[i] else _ZERO_DH


def joint_tail(plan: DecompositionPlan, i: int) -> np.ndarray:
    """Constant rotation restoring the joint offset removed before decomposition."""
    return rot_z(float(plan.shifts[i]))


# --------------------------------------------------------------------------
# angle <-> slack


def recover_angles(omega, plan: DecompositionPlan, model: RobotModel | None = None) -> np.ndarray:
    """Joint angles from slacks: sum of sub-angles plus the joint shift."""
    omega = np.asarray(omega, dtype=float)
    x = squash(omega, plan.lower, plan.upper)
    if plan.kind == "angle":
        theta = np.asarray(x, dtype=float).copy()
    else:
        x = np.asarray(x)
        sub = np.arctan2(np.sqrt(np.maximum(x * (2.0 - x), 0.0)), 1.0 - x)
        theta = np.add.reduceat(sub, plan.starts[:-1]) + plan.shifts
    if model is not None:
        theta = np.clip(theta, model.theta_min, model.theta_max)
    return theta


def angle_to_slack(theta, plan: DecompositionPlan) -> np.ndarray:
    """Slacks reproducing ``theta``; the shifted angle is split equally over sub-angles."""
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (plan.n_joints,):
        raise DomainError(f"expected {plan.n_joints} joint angles, got shape {theta.shape}")
    if plan.kind == "angle":
        return unsquash(theta, plan.lower, plan.upper)
    sub = (theta - plan.shifts) / plan.counts
    if np.any(sub <= plan.sub_min) or np.any(sub >= plan.sub_max):
        raise DomainError("joint angles must lie strictly inside the joint limits")
    L = distance_from_angle(sub)[plan.slack_joint]
    return unsquash(L, plan.lower, plan.upper)


# --------------------------------------------------------------------------
# goal and end effector


@dataclass(frozen=True, eq=False)
class GoalSpec:
    """Target frame plus the points attached to it.

    ``x_scales`` (k_p) place points along the frame x-axis and ``y_scales``
    (q_p) along its y-axis. No scales: position only; x only: 5-DOF.
    """

    target: np.ndarray
    x_scales: tuple[float, ...] = ()
    y_scales: tuple[float, ...] = ()

    def __post_init__(self):
        T = np.asarray(self.target, dtype=float)
        if T.shape != (4, 4):
            raise ValueError("goal target must be a 4x4 transform")
        object.__setattr__(self, "target", T)
        object.__setattr__(self, "x_scales", tuple(float(k) for k in self.x_scales))
        object.__setattr__(self, "y_scales", tuple(float(q) for q in self.y_scales))
        if any(k == 0 for k in self.x_scales + self.y_scales):
            raise ValueError("point scales must be nonzero")
        if self.y_scales and not self.x_scales:
            raise ValueError("y-axis points require x-axis points (6-DOF mode)")

    @classmethod
    def position(cls, p) -> "GoalSpec":
        T = np.eye(4)
        T[:3, 3] = p
        return cls(T)

    @classmethod
    def five_dof(cls, T, scale: float = 1.0) -> "GoalSpec":
        return cls(T, (scale,))

    @classmethod
    def six_dof(cls, T, scale: float = 1.0) -> "GoalSpec":
        return cls(T, (scale,), (scale,))

    @property
    def dof(self) -> int:
        if not self.x_scales:
            return 3
        return 5 if not self.y_scales else 6

    @property
    def coefficients(self) -> np.ndarray:
        """(P, 2): multipliers of the x and y axes for each attached point."""
        rows = [(0.0, 0.0)] + [(k, 0.0) for k in self.x_scales] + [(0.0, q) for q in self.y_scales]
        return np.array(rows)

    @property
    def points(self) -> np.ndarray:
        return end_effector_points(self.target, self)


def end_effector_points(T_e: np.ndarray, goal: GoalSpec) -> np.ndarray:
    coef = goal.coefficients
    return T_e[:3, 3] + coef[:, :1] * T_e[:3, 0] + coef[:, 1:] * T_e[:3, 1]


# --------------------------------------------------------------------------
# rollout


@dataclass(eq=False)
class RolloutTrace:
    omega: np.ndarray
    L: np.ndarray  # (M',) squashed value per slack (distance or angle)
    factors: np.ndarray  # (M', 4, 4)
    prefix: np.ndarray  # (M', 4, 4) world transform before each factor
    joint_local: np.ndarray  # (M, 4, 4)
    joint_world: np.ndarray  # (M, 4, 4)
    u: np.ndarray  # (M, 3)
    T_e: np.ndarray
    U_e: np.ndarray
    U_goal: np.ndarray | None = None
    J: float = 0.0
    # filled by the constraint evaluation
    dists: np.ndarray | None = field(default=None, repr=False)  # (M, N)
    c_joint: np.ndarray | None = field(default=None, repr=False)
    c_link: np.ndarray | None = field(default=None, repr=False)
    c_com: np.ndarray | None = field(default=None, repr=False)
    com: np.ndarray | None = None
    c: np.ndarray | None = None


def _factor(plan: DecompositionPlan, x: float, dh: DHRow) -> np.ndarray:
    if plan.kind == "angle":
        return dh_transform(x, dh)
    return g_transform(x, dh)


def chain_rollout(model: RobotModel, plan: DecompositionPlan, omega, goal: GoalSpec | None = None) -> RolloutTrace:
    """Kinematic part of the rollout, base to end effector."""
    omega = np.asarray(omega, dtype=float)
    if omega.shape != (plan.n_slack,):
        raise DomainError(f"expected {plan.n_slack} slack variables, got shape {omega.shape}")
    L = np.asarray(squash(omega, plan.lower, plan.upper), dtype=float).reshape(-1)
    m, n_slack = model.n_joints, plan.n_slack
    factors = np.empty((n_slack, 4, 4))
    prefix = np.empty((n_slack, 4, 4))
    joint_local = np.empty((m, 4, 4))
    joint_world = np.empty((m, 4, 4))

    T = model.base_transform
    for i in range(m):
        local = np.eye(4)
        for k in range(plan.starts[i], plan.starts[i + 1]):
            F = _factor(plan, L[k], factor_dh(model, plan, k))
            factors[k] = F
            prefix[k] = T @ local
            local = local @ F
        if plan.shifts[i] != 0.0:
            local = local @ joint_tail(plan, i)
        joint_local[i] = local
        T = T @ local
        joint_world[i] = T

    T_e = T @ model.ee_offset
    trace = RolloutTrace(
        omega=omega,
        L=L,
        factors=factors,
        prefix=prefix,
        joint_local=joint_local,
        joint_world=joint_world,
        u=joint_world[:, :3, 3].copy(),
        T_e=T_e,
        U_e=end_effector_points(T_e, goal) if goal is not None else T_e[:3, 3][None, :],
    )
    return trace


def forward_rollout(
    model: RobotModel,
    plan: DecompositionPlan,
    omega,
    goal: GoalSpec,
    obstacles,
    al,
    *,
    com_box=None,
) -> tuple[RolloutTrace, float]:
    """Chain rollout, objective, constraints and augmented Lagrangian value."""
    from .constraints import assemble_constraints, augmented_lagrangian, ee_objective

    trace = chain_rollout(model, plan, omega, goal)
    trace.U_goal = goal.points
    trace.J = ee_objective(trace.U_e, trace.U_goal)
    c = assemble_constraints(trace, obstacles, model, com_box)
    return trace, augmented_lagrangian(trace.J, c, al)


def forward_kinematics(model: RobotModel, theta) -> tuple[np.ndarray, np.ndarray]:
    """Trigonometric FK: (joint world transforms (M,4,4), end-effector transform)."""
    theta = np.asarray(theta, dtype=float)
    T = model.base_transform
    out = np.empty((model.n_joints, 4, 4))
    for i, joint in enumerate(model.joints):
        T = T @ dh_transform(float(theta[i]), joint.dh)
        out[i] = T
    return out, T @ model.ee_offset
