import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import pdo_ik.gradient as grad_mod
import pdo_ik.kinematics as kin
from pdo_ik._fast import FastEvaluator
from pdo_ik.constraints import ALState, ComBox, constraint_count
from pdo_ik.gradcheck import random_problem, relative_error, run_gradcheck
from pdo_ik.gradient import (
    assemble_seeds,
    backward_pass,
    collision_seeds,
    finite_difference_gradient,
    objective_seed,
    value_and_gradient,
)
from pdo_ik.kinematics import GoalSpec, angle_to_slack, forward_rollout
from pdo_ik.presets import preset
from pdo_ik.robot import plan_angles, plan_decomposition


def test_objective_seed_zero_at_goal(planar):
    plan = plan_decomposition(planar)
    omega = np.array([0.1, 0.2, 0.3, 0.4])
    trace = kin.chain_rollout(planar, plan, omega)
    goal = GoalSpec.six_dof(trace.T_e)
    trace, _ = forward_rollout(planar, plan, omega, goal, None, ALState.initial(0))
    assert np.array_equal(objective_seed(trace, goal), np.zeros((4, 4)))


def test_objective_seed_position_only(planar):
    plan = plan_decomposition(planar)
    omega = angle_to_slack(np.zeros(2), plan)
    goal = GoalSpec.position([1.0, -2.0, -3.0])  # u_e = (2, 0, 0)
    trace, _ = forward_rollout(planar, plan, omega, goal, None, ALState.initial(0))
    seed = objective_seed(trace, goal)
    expected = np.zeros((4, 4))
    expected[:3, 3] = (1, 2, 3)
    assert np.allclose(seed, expected, atol=1e-12)


def test_collision_seeds_none_violated(planar):
    plan = plan_decomposition(planar)
    goal = GoalSpec.position([0, 0, 0])
    pts = np.array([[10.0, 10, 10]])
    al = ALState.initial(constraint_count(planar, 1, False))
    trace, _ = forward_rollout(planar, plan, np.zeros(4), goal, pts, al)
    assert np.array_equal(collision_seeds(trace, pts, planar, al), np.zeros((2, 4, 4)))


def test_collision_seed_single_joint():
    # one joint at the origin, radius 1.5, point at (-1, 0, 0): u - o = (1, 0, 0), c = 0.5
    from pdo_ik.presets import build_chain

    model = build_chain("one", [(0.0, 0.0, 0.0)], [(-1.0, 1.0)], [1.5])
    plan = plan_decomposition(model)
    pts = np.array([[-1.0, 0.0, 0.0]])
    al = ALState(np.zeros(1), 1.0)
    trace, _ = forward_rollout(model, plan, np.zeros(1), GoalSpec.position([0, 0, 0]), pts, al)
    assert trace.c[0] == pytest.approx(0.5)
    seed = collision_seeds(trace, pts, model, al)
    assert np.allclose(seed[0, :3, 3], [-0.5, 0, 0])

    # oracle: central difference of rho/2 c'^2 in u
    def pen(u):
        c = max(0.0, 1.5 - np.linalg.norm(u - pts[0]))
        return 0.5 * c * c

    fd = finite_difference_gradient(pen, np.zeros(3))
    assert np.allclose(seed[0, :3, 3], fd, atol=1e-8)


def test_coincident_point_gives_zero_direction():
    from pdo_ik.presets import build_chain

    model = build_chain("one", [(0.0, 0.0, 0.0)], [(-1.0, 1.0)], [0.1])
    plan = plan_decomposition(model)
    pts = np.zeros((1, 3))
    al = ALState(np.ones(1), 1.0)
    value, g, trace = value_and_gradient(model, plan, np.zeros(1), GoalSpec.position([0, 0, 0]), pts, al)
    assert trace.c[0] == 0.1
    assert np.all(np.isfinite(g)) and math.isfinite(value)


def test_straight_arm_gradient_is_zero(planar):
    plan = plan_decomposition(planar)
    omega = angle_to_slack(np.zeros(2), plan)
    goal = GoalSpec.position([2.0, 0, 0])
    _, g, _ = value_and_gradient(planar, plan, omega, goal, None, ALState.initial(0))
    assert np.allclose(g, 0.0, atol=1e-15)


def test_finite_difference_helper():
    assert np.allclose(finite_difference_gradient(lambda w: w @ w, np.array([1.0, 2.0])), [2, 4], atol=1e-6)
    assert np.array_equal(finite_difference_gradient(lambda w: 3.0, np.array([1.0, 2.0])), [0, 0])
    with pytest.raises(ValueError):
        finite_difference_gradient(lambda w: 0.0, np.zeros(1), h=0.0)


@given(seed=st.integers(0, 2**32 - 1))
def test_reference_and_compiled_gradients_match_fd(seed):
    p = random_problem(np.random.default_rng(seed))
    plan = plan_decomposition(p.model)
    f = lambda w: forward_rollout(p.model, plan, w, p.goal, p.obstacles, p.al, com_box=p.com_box)[1]
    fd = finite_difference_gradient(f, p.omega)
    value, g, _ = value_and_gradient(p.model, plan, p.omega, p.goal, p.obstacles, p.al, com_box=p.com_box)
    assert relative_error(g, fd) < 1e-5
    ev = FastEvaluator(p.model, plan, p.goal, p.obstacles, p.com_box)
    v_fast, g_fast = ev.value_and_grad(p.omega, p.al.mu, p.al.rho)
    assert v_fast == pytest.approx(value, rel=1e-12, abs=1e-12)
    assert np.allclose(g_fast, g, rtol=1e-10, atol=1e-12)
    assert np.allclose(ev.constraints(p.omega), forward_rollout(
        p.model, plan, p.omega, p.goal, p.obstacles, p.al, com_box=p.com_box)[0].c, atol=1e-12)


@pytest.mark.parametrize("name", ["franka_like", "weighted_chain"])
def test_angle_plan_gradient(name, rng):
    model = preset(name)
    plan = plan_angles(model)
    box = ComBox.humanoid_default() if model.has_mass_data else None
    pts = rng.uniform(-0.5, 0.5, size=(40, 3)) + [0, 0, 0.5]
    n_c = constraint_count(model, len(pts), box is not None)
    al = ALState(rng.uniform(0, 2, n_c), 10.0)
    goal = GoalSpec.six_dof(np.eye(4))
    omega = rng.normal(size=plan.n_slack)
    f = lambda w: forward_rollout(model, plan, w, goal, pts, al, com_box=box)[1]
    _, g, _ = value_and_gradient(model, plan, omega, goal, pts, al, com_box=box)
    assert relative_error(g, finite_difference_gradient(f, omega)) < 1e-6
    _, g_fast = FastEvaluator(model, plan, goal, pts, box).value_and_grad(omega, al.mu, al.rho)
    assert np.allclose(g_fast, g, rtol=1e-10, atol=1e-12)


def test_seed_bottom_right_entry_cannot_leak(rng):
    p = random_problem(rng, preset("ur10_like"))
    plan = plan_decomposition(p.model)
    trace, _ = forward_rollout(p.model, plan, p.omega, p.goal, p.obstacles, p.al, com_box=p.com_box)
    seeds = assemble_seeds(trace, p.goal, p.obstacles, p.model, p.al)
    g0 = backward_pass(trace, seeds, p.model, plan)
    extra = np.zeros((4, 4))
    extra[3, 3] = 1.0  # dJ/dT_e with the bottom-right entry set to 1
    bumped = seeds.copy()
    bumped[-1] += extra @ p.model.ee_offset.T
    g1 = backward_pass(trace, bumped, p.model, plan)
    assert np.allclose(g0, g1, atol=1e-12, rtol=0)


def test_backward_pass_reuses_trace(monkeypatch, rng):
    p = random_problem(rng, preset("franka_like"))
    plan = plan_decomposition(p.model)
    trace, _ = forward_rollout(p.model, plan, p.omega, p.goal, p.obstacles, p.al, com_box=p.com_box)
    seeds = assemble_seeds(trace, p.goal, p.obstacles, p.model, p.al)
    calls = {"g_transform": 0, "g_derivative": 0, "dh_transform": 0}

    def counting(name):
        original = getattr(kin, name)

        def wrapper(*args, **kw):
            calls[name] += 1
            return original(*args, **kw)

        return wrapper

    for name in calls:
        monkeypatch.setattr(kin, name, counting(name))
    grad_mod.backward_pass(trace, seeds, p.model, plan)
    assert calls["g_transform"] == 0
    assert calls["dh_transform"] == 0
    assert calls["g_derivative"] == plan.n_slack  # one derivative per factor, nothing else


def test_gradcheck_suite_small():
    result = run_gradcheck(trials=10, seed=3)
    assert result.passed and result.trials == 10
