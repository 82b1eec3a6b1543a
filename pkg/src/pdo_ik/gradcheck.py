"""Finite-difference check of the analytic gradient on random problems."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._fast import FastEvaluator
from .constraints import ALState, ComBox, assemble_constraints, constraint_count
from .gradient import finite_difference_gradient, value_and_gradient
from .kinematics import GoalSpec, chain_rollout, forward_rollout
from .presets import build_chain
from .robot import RobotModel, plan_decomposition

KINK_MARGIN = 1e-4  # constraints this close to zero are redrawn (c' has a kink there)
FD_STEP = 1e-6
MAX_REDRAW = 200


@dataclass
class GradCheckResult:
    trials: int
    max_rel_error: float
    worst_trial: int
    errors: np.ndarray

    @property
    def passed(self) -> bool:
        return self.max_rel_error < 1e-5


def relative_error(g: np.ndarray, fd: np.ndarray) -> float:
    return float(np.max(np.abs(g - fd), initial=0.0) / max(np.max(np.abs(fd), initial=0.0), 1e-8))


def random_chain(rng: np.random.Generator, n_joints: int) -> RobotModel:
    rows = []
    for _ in range(n_joints):
        rows.append((rng.choice([0.0, math.pi / 2, -math.pi / 2, rng.uniform(-math.pi, math.pi)]),
                     rng.uniform(-0.4, 0.4), rng.uniform(-0.4, 0.4)))
    limits = []
    for _ in range(n_joints):
        width = rng.uniform(0.3, 4.0 * math.pi) if rng.random() < 0.4 else rng.uniform(0.3, math.pi)
        lo = rng.uniform(-math.pi, math.pi) - 0.5 * width
        limits.append((lo, lo + width))
    radii = rng.uniform(0.03, 0.08, size=n_joints)
    masses = rng.uniform(0.5, 5.0, size=n_joints)
    ee = np.eye(4)
    ee[:3, 3] = rng.uniform(-0.2, 0.2, size=3)
    return build_chain(f"random-{n_joints}", rows, limits, radii, ee=ee, masses=masses)


@dataclass
class Problem:
    model: RobotModel
    goal: GoalSpec
    obstacles: np.ndarray
    com_box: ComBox | None
    omega: np.ndarray
    al: ALState


def random_problem(rng: np.random.Generator, model: RobotModel | None = None) -> Problem:
    """Random chain, goal, slack point, multipliers, obstacles and optional CoM box.

    Obstacles are drawn around the joints so that some collision constraints
    are active; any draw with a constraint within ``KINK_MARGIN`` of zero is
    redrawn, since central differences are invalid across the kink of c'.
    """
    model = model or random_chain(rng, int(rng.integers(2, 9)))
    plan = plan_decomposition(model)
    omega = rng.uniform(-3.0, 3.0, size=plan.n_slack)
    T = np.eye(4)
    T[:3, :3] = np.linalg.qr(rng.normal(size=(3, 3)))[0]
    T[:3, 3] = rng.uniform(-1.0, 1.0, size=3)
    goal = [GoalSpec.position(T[:3, 3]), GoalSpec.five_dof(T), GoalSpec.six_dof(T)][int(rng.integers(3))]
    joints = chain_rollout(model, plan, omega).joint_world[:, :3, 3]
    n_points = int(rng.integers(0, 101))
    use_com = model.has_mass_data and rng.random() < 0.7

    for _ in range(MAX_REDRAW):
        anchor = joints[rng.integers(model.n_joints, size=n_points)]
        obstacles = anchor + rng.normal(scale=0.1, size=(n_points, 3))
        box = None
        if use_com:
            center = rng.normal(scale=0.3, size=3)
            half = rng.uniform(0.05, 0.5, size=3)
            box = ComBox(center - half, center + half)
        n_c = constraint_count(model, n_points, box is not None)
        al = ALState(mu=rng.uniform(0.0, 10.0, size=n_c), rho=float(rng.uniform(1.0, 100.0)))
        trace, _ = forward_rollout(model, plan, omega, goal, obstacles, al, com_box=box)
        c = assemble_constraints(trace, obstacles, model, box)
        if np.all(np.abs(c) > KINK_MARGIN):
            return Problem(model, goal, obstacles, box, omega, al)
    raise RuntimeError("could not draw a problem away from constraint kinks")


def check_problem(p: Problem, h: float = FD_STEP) -> float:
    """Worst relative error of the reference and compiled gradients."""
    plan = plan_decomposition(p.model)

    def f(w):
        return forward_rollout(p.model, plan, w, p.goal, p.obstacles, p.al, com_box=p.com_box)[1]

    fd = finite_difference_gradient(f, p.omega, h)
    _, g_ref, _ = value_and_gradient(p.model, plan, p.omega, p.goal, p.obstacles, p.al, com_box=p.com_box)
    ev = FastEvaluator(p.model, plan, p.goal, p.obstacles, p.com_box)
    _, g_fast = ev.value_and_grad(p.omega, p.al.mu, p.al.rho)
    return max(relative_error(g_ref, fd), relative_error(g_fast, fd))


def run_gradcheck(trials: int = 100, seed: int = 0, model: RobotModel | None = None) -> GradCheckResult:
    rng = np.random.default_rng(seed)
    errors = np.array([check_problem(random_problem(rng, model)) for _ in range(trials)])
    worst = int(np.argmax(errors)) if trials else -1
    return GradCheckResult(trials, float(errors.max(initial=0.0)), worst, errors)
