"""Augmented-Lagrangian IK solve over slack variables, plus the angle baseline."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from ._fast import FastEvaluator
from .constraints import ComBox, max_violation
from .kinematics import GoalSpec, angle_to_slack, forward_kinematics, recover_angles
from .lbfgs import InnerOptions, LBFGSResult, lbfgs_minimize
from .robot import DecompositionPlan, RobotModel, plan_angles, plan_decomposition

__all__ = [
    "SolverOptions",
    "SolveReport",
    "solve_ik",
    "solve_ik_angle_baseline",
    "recover_angles",
    "pose_errors",
    "lbfgs_minimize",
]

STATUSES = ("converged", "constraint-stalled", "time-limit", "max-iterations")


@dataclass(frozen=True)
class SolverOptions:
    k_max: int = 20
    c_tol: float = 1e-4
    beta: float = 0.99
    alpha: float = 10.0
    rho0: float = 1.0
    mu0: float = 0.0
    inner: InnerOptions = field(default_factory=InnerOptions)
    time_limit: float = 60.0

    def __post_init__(self):
        if not 0.0 < self.beta < 1.0:
            raise ValueError("beta must lie in (0, 1)")
        if not self.alpha > 1.0:
            raise ValueError("alpha must exceed 1")
        if not self.rho0 > 0.0:
            raise ValueError("rho0 must be positive")
        if not self.c_tol > 0.0:
            raise ValueError("c_tol must be positive")
        if self.mu0 < 0.0:
            raise ValueError("mu0 must be nonnegative")
        if self.k_max < 1:
            raise ValueError("k_max must be at least 1")
        if not self.time_limit > 0:
            raise ValueError("time_limit must be positive")


@dataclass
class SolveReport:
    theta: np.ndarray
    omega: np.ndarray
    status: str
    eps_d: float
    eps_theta: float
    max_violation: float
    objective: float
    outer_iters: int
    inner_iters: int
    wall_time: float
    solver: str = "pdo"

    @property
    def converged(self) -> bool:
        return self.status == "converged"

    def to_dict(self) -> dict:
        return {
            "solver": self.solver,
            "status": self.status,
            "theta": [float(t) for t in self.theta],
            "omega": [float(w) for w in self.omega],
            "eps_d": self.eps_d,
            "eps_theta": self.eps_theta,
            "max_violation": self.max_violation,
            "objective": self.objective,
            "outer_iters": self.outer_iters,
            "inner_iters": self.inner_iters,
            "wall_time": self.wall_time,
        }


def _angle_between(a: np.ndarray, b: np.ndarray) -> float:
    # atan2 form stays accurate for tiny angles, unlike arccos of a dot product
    return math.atan2(float(np.linalg.norm(np.cross(a, b))), float(a @ b))


def pose_errors(model: RobotModel, theta, goal: GoalSpec) -> tuple[float, float]:
    """Position error (m) and rotation error (rad) of trig FK at ``theta``.

    Rotation error follows the goal mode: 0 for position goals, the x-axis
    misalignment for 5-DOF goals, the geodesic angle for 6-DOF goals.
    """
    _, T_e = forward_kinematics(model, theta)
    eps_d = float(np.linalg.norm(T_e[:3, 3] - goal.target[:3, 3]))
    if goal.dof == 3:
        return eps_d, 0.0
    if goal.dof == 5:
        return eps_d, _angle_between(T_e[:3, 0], goal.target[:3, 0])
    R = T_e[:3, :3].T @ goal.target[:3, :3]
    axis = np.array([R[2, 1] - R[1, 2], R[0, 2] - R[2, 0], R[1, 0] - R[0, 1]])
    return eps_d, math.atan2(0.5 * float(np.linalg.norm(axis)), 0.5 * (np.trace(R) - 1.0))


def _solve(
    model: RobotModel,
    plan: DecompositionPlan,
    goal: GoalSpec,
    obstacles,
    options: SolverOptions,
    omega0,
    com_box: ComBox | None,
    name: str,
) -> SolveReport:
    start = time.perf_counter()
    deadline = start + options.time_limit
    ev = FastEvaluator(model, plan, goal, obstacles, com_box)
    omega = np.zeros(plan.n_slack) if omega0 is None else np.array(omega0, dtype=float)
    if omega.shape != (plan.n_slack,):
        raise ValueError(f"expected {plan.n_slack} initial slacks, got shape {omega.shape}")

    mu = np.full(ev.n_constraints, options.mu0)
    rho = options.rho0
    c_last = math.inf
    status = "max-iterations"
    inner_total = 0
    outer = 0
    c = ev.constraints(omega)

    for outer in range(1, options.k_max + 1):
        result: LBFGSResult = lbfgs_minimize(
            lambda w: ev.value_and_grad(w, mu, rho), omega, options.inner, deadline
        )
        omega = result.x
        inner_total += result.nit
        c = ev.constraints(omega)
        cp = np.maximum(c, 0.0)
        c_max = float(cp.max(initial=0.0))
        if result.status == "time-limit" or time.perf_counter() > deadline:
            status = "time-limit"
            break
        if c_max < options.c_tol:
            status = "converged"
            break
        if c_max >= options.beta * c_last:
            status = "constraint-stalled"
            break
        c_last = c_max
        mu = np.maximum(0.0, mu + rho * cp)
        rho *= options.alpha

    theta = recover_angles(omega, plan, model)
    eps_d, eps_theta = pose_errors(model, theta, goal)
    return SolveReport(
        theta=theta,
        omega=omega,
        status=status,
        eps_d=eps_d,
        eps_theta=eps_theta,
        max_violation=max_violation(c),
        objective=ev.objective(omega),
        outer_iters=outer,
        inner_iters=inner_total,
        wall_time=time.perf_counter() - start,
        solver=name,
    )


def solve_ik(
    model: RobotModel,
    plan: DecompositionPlan | None,
    goal: GoalSpec,
    obstacles=None,
    options: SolverOptions | None = None,
    omega0=None,
    *,
    com_box: ComBox | None = None,
) -> SolveReport:
    """Distance-parameterized constrained IK.

    ``omega0 = None`` starts every sub-angle at the middle of its range.
    """
    plan = plan or plan_decomposition(model)
    if plan.kind != "distance":
        raise ValueError("solve_ik needs a distance decomposition plan")
    return _solve(model, plan, goal, obstacles, options or SolverOptions(), omega0, com_box, "pdo")


def solve_ik_angle_baseline(
    model: RobotModel,
    goal: GoalSpec,
    obstacles=None,
    options: SolverOptions | None = None,
    theta0=None,
    *,
    com_box: ComBox | None = None,
) -> SolveReport:
    """Same outer loop with joint angles squashed directly into their limits."""
    plan = plan_angles(model)
    omega0 = None if theta0 is None else angle_to_slack(theta0, plan)
    return _solve(model, plan, goal, obstacles, options or SolverOptions(), omega0, com_box, "angle")


def solve(model: RobotModel, goal: GoalSpec, obstacles=None, options=None, *, solver="pdo",
          omega0=None, com_box=None) -> SolveReport:
    """Dispatch on solver name ("pdo" or "angle"); ``omega0`` is in that solver's slack space."""
    if solver == "pdo":
        return solve_ik(model, None, goal, obstacles, options, omega0, com_box=com_box)
    if solver == "angle":
        plan = plan_angles(model)
        return _solve(model, plan, goal, obstacles, options or SolverOptions(), omega0, com_box, "angle")
    raise ValueError(f"unknown solver {solver!r}")
