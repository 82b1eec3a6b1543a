"""Reverse accumulation of the augmented Lagrangian gradient along the chain.

Adjoints are 4x4 matrices ``dL/dT_i`` w.r.t. the world transform of each joint
frame.  Seeds come from the objective (through the end-effector offset), the
violated collision constraints and the CoM box; they are then swept from the
end effector back to the base, contracting each factor with its derivative.
"""

from __future__ import annotations

from typing import Callable

import numpy as np

from . import kinematics as kin
from .constraints import ALState, ComBox, as_cloud
from .kinematics import GoalSpec, RolloutTrace
from .robot import DecompositionPlan, RobotModel


def objective_seed(trace: RolloutTrace, goal: GoalSpec) -> np.ndarray:
    """``dJ/dT_e``.  The bottom row is structurally constant and left at zero."""
    coef = goal.coefficients
    resid = trace.U_e - (trace.U_goal if trace.U_goal is not None else goal.points)
    seed = np.zeros((4, 4))
    seed[:3, 0] = coef[:, 0] @ resid
    seed[:3, 1] = coef[:, 1] @ resid
    seed[:3, 3] = resid.sum(axis=0)
    return seed


def _unit_rows(diff: np.ndarray, dist: np.ndarray) -> np.ndarray:
    safe = np.where(dist > 0.0, dist, 1.0)
    return np.where((dist > 0.0)[..., None], diff / safe[..., None], 0.0)


def collision_seeds(trace: RolloutTrace, obstacles, model: RobotModel, al: ALState) -> np.ndarray:
    """Adjoint contributions of violated joint/link constraints, shape (M, 4, 4)."""
    cloud = as_cloud(obstacles)
    m, n = model.n_joints, len(cloud)
    seeds = np.zeros((m, 4, 4))
    if n == 0:
        return seeds
    # d/du of mu*c + rho/2*c^2 is (mu + rho*c) dc/du, dc/du = -(u - o)/|u - o|
    unit = _unit_rows(trace.u[:, None, :] - cloud[None, :, :], trace.dists)  # (M, N, 3)
    mu_joint = al.mu[: m * n].reshape(m, n)
    w = np.where(trace.c_joint > 0.0, mu_joint + al.rho * trace.c_joint, 0.0)
    grad_u = -np.einsum("mn,mnk->mk", w, unit)
    if m > 1:
        mu_link = al.mu[m * n : (2 * m - 1) * n].reshape(m - 1, n)
        wl = np.where(trace.c_link > 0.0, mu_link + al.rho * trace.c_link, 0.0)
        grad_u[:-1] -= np.einsum("mn,mnk->mk", wl, unit[:-1])
        grad_u[1:] -= np.einsum("mn,mnk->mk", wl, unit[1:])
    seeds[:, :3, 3] = grad_u
    return seeds


def com_seeds(trace: RolloutTrace, model: RobotModel, al: ALState) -> np.ndarray:
    m = model.n_joints
    seeds = np.zeros((m, 4, 4))
    if trace.c_com is None:
        return seeds
    c = trace.c_com
    w = np.where(c > 0.0, al.mu[-6:] + al.rho * c, 0.0)
    # lower - com and com - upper: derivative -1 / +1 w.r.t. com
    dcom = w[1::2] - w[0::2]
    masses = model.masses
    scale = masses / masses.sum()
    seeds[:, :3, :] = scale[:, None, None] * np.einsum("k,mj->mkj", dcom, model.com_points)
    return seeds


def assemble_seeds(
    trace: RolloutTrace, goal: GoalSpec, obstacles, model: RobotModel, al: ALState
) -> np.ndarray:
    seeds = collision_seeds(trace, obstacles, model, al)
    seeds += com_seeds(trace, model, al)
    # T_e = T_M @ ee_offset
    seeds[-1] += objective_seed(trace, goal) @ model.ee_offset.T
    return seeds


def _factor_derivative(plan: DecompositionPlan, x: float, dh) -> np.ndarray:
    if plan.kind == "angle":
        return kin.dh_derivative(x, dh)
    return kin.g_derivative(x, dh)


def backward_pass(trace: RolloutTrace, seeds: np.ndarray, model: RobotModel, plan: DecompositionPlan) -> np.ndarray:
    """Sweep adjoints from the end effector to the base; returns dL/domega.

    Only cached transforms from ``trace`` are used; no forward quantity is
    recomputed here.
    """
    grad = np.zeros(plan.n_slack)
    dx = kin.squash_derivative(trace.omega, plan.lower, plan.upper)
    dx = np.asarray(dx).reshape(-1)
    carry = np.zeros((4, 4))
    for i in range(model.n_joints - 1, -1, -1):
        adj = seeds[i] + carry  # dL/dT_i
        if plan.shifts[i] != 0.0:
            adj = adj @ kin.joint_tail(plan, i).T
        for k in range(plan.starts[i + 1] - 1, plan.starts[i] - 1, -1):
            dF = trace.prefix[k].T @ adj  # dL/dF_k
            dFdx = _factor_derivative(plan, trace.L[k], kin.factor_dh(model, plan, k))
            grad[k] = np.sum(dF * dFdx) * dx[k]
            adj = adj @ trace.factors[k].T
        carry = adj
    return grad


def value_and_gradient(
    model: RobotModel,
    plan: DecompositionPlan,
    omega,
    goal: GoalSpec,
    obstacles,
    al: ALState,
    *,
    com_box: ComBox | None = None,
) -> tuple[float, np.ndarray, RolloutTrace]:
    trace, value = kin.forward_rollout(model, plan, omega, goal, obstacles, al, com_box=com_box)
    seeds = assemble_seeds(trace, goal, obstacles, model, al)
    return value, backward_pass(trace, seeds, model, plan), trace


def finite_difference_gradient(f: Callable[[np.ndarray], float], omega, h: float = 1e-6) -> np.ndarray:
    """Central differences, one coordinate at a time."""
    if not h > 0:
        raise ValueError("step must be positive")
    omega = np.asarray(omega, dtype=float)
    grad = np.empty_like(omega)
    for k in range(omega.size):
        e = np.zeros_like(omega)
        e[k] = h
        grad[k] = (f(omega + e) - f(omega - e)) / (2.0 * h)
    return grad
