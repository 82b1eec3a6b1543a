import json
import math

import numpy as np
import pytest

from pdo_ik.presets import PRESETS, preset
from pdo_ik.robot import (
    RobotConfigError,
    load_robot,
    load_robot_file,
    plan_angles,
    plan_decomposition,
    robot_from_dict,
    robot_to_dict,
    spheroid_semi_major,
)


def joint_doc(**kw):
    doc = dict(alpha=0.0, a=0.0, d=0.0, theta_min=0.0, theta_max=math.pi, radius=0.05, link_semi_major=0.1)
    doc.update(kw)
    return doc


def test_minimal_one_joint_document():
    model = load_robot(json.dumps({"joints": [joint_doc()]}))
    assert model.n_joints == 1
    assert np.array_equal(model.base_transform, np.eye(4))


def test_inverted_limits_rejected():
    with pytest.raises(RobotConfigError, match="theta_min"):
        load_robot(json.dumps({"joints": [joint_doc(theta_min=1.0, theta_max=1.0)]}))


def test_missing_radius_names_joint():
    joints = [joint_doc(a=0.1, link_semi_major=0.2) for _ in range(7)]
    del joints[4]["radius"]
    with pytest.raises(RobotConfigError, match="joint 4"):
        load_robot(json.dumps({"joints": joints}))


@pytest.mark.parametrize(
    "doc, pattern",
    [
        ("{not json", "malformed"),
        (json.dumps({"joints": []}), "non-empty"),
        (json.dumps({"joints": [joint_doc(theta_max=360.0)]}), "radians"),
        (json.dumps({"angle_unit": "deg", "joints": [joint_doc()]}), "unit"),
        (json.dumps({"joints": [joint_doc(radius=-1.0)]}), "radius"),
        (json.dumps({"joints": [joint_doc(), joint_doc(a=1.0, link_semi_major=0.1)]}), "spheroid"),
        (json.dumps({"base_transform": [1] * 16, "joints": [joint_doc()]}), "base_transform"),
        (json.dumps({"joints": [joint_doc(mass=1.0), joint_doc()]}), "mass"),
    ],
)
def test_invalid_documents(doc, pattern):
    with pytest.raises(RobotConfigError, match=pattern):
        load_robot(doc)


@pytest.mark.parametrize("name", list(PRESETS))
def test_preset_round_trip(name, tmp_path):
    model = preset(name)
    path = tmp_path / "robot.json"
    path.write_text(json.dumps(robot_to_dict(model)))
    again = load_robot_file(path)
    assert again.n_joints == model.n_joints
    assert np.allclose(again.theta_min, model.theta_min)
    assert np.allclose(again.base_transform, model.base_transform)
    assert again.has_mass_data == model.has_mass_data


def test_unknown_preset():
    with pytest.raises(KeyError, match="unknown preset"):
        preset("nope")


def plan_for(lo, hi):
    return plan_decomposition(robot_from_dict({"joints": [joint_doc(theta_min=lo, theta_max=hi)]}))


def test_plan_half_turn():
    plan = plan_for(0.0, math.pi)
    assert plan.counts[0] == 1
    assert plan.lower[0] == 0.0 and plan.upper[0] == pytest.approx(2.0, abs=1e-15)


def test_plan_full_double_turn():
    plan = plan_for(-2 * math.pi, 2 * math.pi)
    assert plan.shifts[0] == -2 * math.pi
    assert plan.counts[0] == 4 and plan.n_slack == 4
    assert plan.sub_min[0] == 0.0 and plan.sub_max[0] == pytest.approx(math.pi)
    assert np.all(plan.lower == 0.0) and np.allclose(plan.upper, 2.0)


def test_plan_three_quarter_turn():
    plan = plan_for(0.0, 1.5 * math.pi)
    assert plan.counts[0] == 2
    assert plan.sub_max[0] == pytest.approx(0.75 * math.pi)
    assert plan.upper == pytest.approx(1.0 + math.sqrt(0.5))


@pytest.mark.parametrize("name", list(PRESETS))
def test_plan_invariants(name):
    model = preset(name)
    plan = plan_decomposition(model)
    assert np.all((plan.lower >= 0) & (plan.upper <= 2) & (plan.lower < plan.upper))
    # slack indices partition 0..M'-1 in chain order
    assert np.array_equal(np.concatenate([np.arange(plan.n_slack)[plan.joint_slice(i)] for i in range(model.n_joints)]),
                          np.arange(plan.n_slack))
    assert np.all(np.diff(plan.slack_joint) >= 0)
    angles = plan_angles(model)
    assert angles.n_slack == model.n_joints


def test_spheroid_semi_major_contains_capsule():
    # points on the capsule cylinder and caps lie on or inside the spheroid
    length, r = 0.6, 0.07
    a = spheroid_semi_major(length, r)
    u0, u1 = np.zeros(3), np.array([length, 0, 0])
    t = np.linspace(0, length, 201)
    pts = np.stack([t, np.full_like(t, r), np.zeros_like(t)], axis=1)
    total = np.linalg.norm(pts - u0, axis=1) + np.linalg.norm(pts - u1, axis=1)
    assert np.all(total <= 2 * a + 1e-12)
    assert np.isclose(total.max(), 2 * a)
