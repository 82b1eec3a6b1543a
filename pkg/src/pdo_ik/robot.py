"""Robot descriptions: DH chain, joint limits, collision geometry and masses.

Frames follow the proximal (modified) DH convention: the transform from frame
``i-1`` to frame ``i`` is ``RotX(alpha) TransX(a) RotZ(theta) TransZ(d)``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

# Largest accepted |theta| limit. Anything beyond is almost certainly degrees.
MAX_ABS_LIMIT = 4.0 * math.pi

# Guards ceil() against (4*pi)/pi evaluating to 4.000000000000001.
_CEIL_SLACK = 1e-12


class RobotConfigError(ValueError):
    """A robot description failed to parse or validate."""


@dataclass(frozen=True)
class DHRow:
    alpha: float
    a: float
    d: float

    def __post_init__(self):
        if not all(math.isfinite(v) for v in (self.alpha, self.a, self.d)):
            raise RobotConfigError("DH parameters must be finite")


@dataclass(frozen=True, eq=False)
class JointSpec:
    dh: DHRow
    theta_min: float
    theta_max: float
    radius: float
    link_semi_major: float
    mass: float | None = None
    com_offset: np.ndarray | None = field(default=None, repr=False)

    @property
    def range(self) -> float:
        return self.theta_max - self.theta_min


def _check_rigid(name: str, T: np.ndarray) -> np.ndarray:
    T = np.asarray(T, dtype=float)
    if T.shape != (4, 4):
        raise RobotConfigError(f"{name}: expected a 4x4 transform, got shape {T.shape}")
    if not np.all(np.isfinite(T)):
        raise RobotConfigError(f"{name}: non-finite entries")
    if not np.allclose(T[3], [0.0, 0.0, 0.0, 1.0], atol=1e-12):
        raise RobotConfigError(f"{name}: bottom row must be (0, 0, 0, 1)")
    R = T[:3, :3]
    if not np.allclose(R.T @ R, np.eye(3), atol=1e-6) or np.linalg.det(R) < 0:
        raise RobotConfigError(f"{name}: rotation block is not a proper rotation")
    return T


@dataclass(frozen=True, eq=False)
class RobotModel:
    """Serial revolute chain.

    ``joints[i].link_semi_major`` bounds the link running from joint ``i`` to
    joint ``i+1``; the value on the last joint is unused by the collision model.
    """

    joints: tuple[JointSpec, ...]
    base_transform: np.ndarray = field(default_factory=lambda: np.eye(4), repr=False)
    ee_offset: np.ndarray = field(default_factory=lambda: np.eye(4), repr=False)
    name: str = "robot"

    def __post_init__(self):
        object.__setattr__(self, "joints", tuple(self.joints))
        object.__setattr__(self, "base_transform", _check_rigid("base_transform", self.base_transform))
        object.__setattr__(self, "ee_offset", _check_rigid("ee_offset", self.ee_offset))
        if len(self.joints) < 1:
            raise RobotConfigError("a robot needs at least one joint")
        for i, joint in enumerate(self.joints):
            _validate_joint(i, joint)
        for i in range(len(self.joints) - 1):
            half = 0.5 * self.link_lengths[i]
            if self.joints[i].link_semi_major < half - 1e-12:
                raise RobotConfigError(
                    f"joint {i}: link_semi_major {self.joints[i].link_semi_major:.6g} is below half "
                    f"the distance to joint {i + 1} ({half:.6g}); the link spheroid would be empty"
                )
        masses = [j.mass is not None for j in self.joints]
        if any(masses) and not all(masses):
            missing = masses.index(False)
            raise RobotConfigError(f"joint {missing}: mass data must be given for all joints or none")

    @property
    def n_joints(self) -> int:
        return len(self.joints)

    @property
    def theta_min(self) -> np.ndarray:
        return np.array([j.theta_min for j in self.joints])

    @property
    def theta_max(self) -> np.ndarray:
        return np.array([j.theta_max for j in self.joints])

    @property
    def radii(self) -> np.ndarray:
        return np.array([j.radius for j in self.joints])

    @property
    def semi_majors(self) -> np.ndarray:
        """Semi-major axes of the M-1 link spheroids."""
        return np.array([j.link_semi_major for j in self.joints[:-1]])

    @property
    def link_lengths(self) -> np.ndarray:
        """Distance from joint i to joint i+1, which is fixed under modified DH."""
        return np.array([math.hypot(j.dh.a, j.dh.d) for j in self.joints[1:]])

    @property
    def has_mass_data(self) -> bool:
        return all(j.mass is not None for j in self.joints)

    @property
    def masses(self) -> np.ndarray:
        if not self.has_mass_data:
            raise RobotConfigError(f"{self.name}: no mass data")
        return np.array([j.mass for j in self.joints], dtype=float)

    @property
    def com_points(self) -> np.ndarray:
        """Per-link CoM in the link's own frame, homogeneous (M, 4)."""
        if not self.has_mass_data:
            raise RobotConfigError(f"{self.name}: no mass data")
        return np.array([j.com_offset[:, 3] for j in self.joints])


def _validate_joint(i: int, joint: JointSpec) -> None:
    values = {
        "theta_min": joint.theta_min,
        "theta_max": joint.theta_max,
        "radius": joint.radius,
        "link_semi_major": joint.link_semi_major,
    }
    for key, value in values.items():
        if not math.isfinite(value):
            raise RobotConfigError(f"joint {i}: {key} must be finite")
    if not joint.theta_min < joint.theta_max:
        raise RobotConfigError(f"joint {i}: theta_min must be < theta_max")
    if max(abs(joint.theta_min), abs(joint.theta_max)) > MAX_ABS_LIMIT:
        raise RobotConfigError(f"joint {i}: limits exceed 4*pi; angles must be given in radians")
    if joint.radius < 0:
        raise RobotConfigError(f"joint {i}: radius must be >= 0")
    if joint.link_semi_major < 0:
        raise RobotConfigError(f"joint {i}: link_semi_major must be >= 0")
    if joint.mass is not None:
        if not (math.isfinite(joint.mass) and joint.mass > 0):
            raise RobotConfigError(f"joint {i}: mass must be positive")
        if joint.com_offset is None:
            raise RobotConfigError(f"joint {i}: mass given without com_offset")
        _check_rigid(f"joint {i}: com_offset", joint.com_offset)


# --------------------------------------------------------------------------
# loading


_JOINT_REQUIRED = ("alpha", "a", "d", "theta_min", "theta_max", "radius", "link_semi_major")


def _transform_field(doc: dict, key: str, where: str) -> np.ndarray:
    raw = doc.get(key)
    if raw is None:
        return np.eye(4)
    try:
        flat = np.asarray(raw, dtype=float).reshape(-1)
    except (TypeError, ValueError) as exc:
        raise RobotConfigError(f"{where}: {key} must be 16 numbers") from exc
    if flat.size != 16:
        raise RobotConfigError(f"{where}: {key} must be 16 numbers (row-major), got {flat.size}")
    return flat.reshape(4, 4)


def robot_from_dict(doc: dict[str, Any]) -> RobotModel:
    if not isinstance(doc, dict):
        raise RobotConfigError("robot description must be a JSON object")
    unit = doc.get("angle_unit", doc.get("units", "rad"))
    if str(unit).lower() not in ("rad", "radian", "radians", "si"):
        raise RobotConfigError(f"unsupported angle unit {unit!r}; only radians are accepted")
    raw_joints = doc.get("joints")
    if not isinstance(raw_joints, list) or not raw_joints:
        raise RobotConfigError("'joints' must be a non-empty array")

    joints = []
    for i, jd in enumerate(raw_joints):
        if not isinstance(jd, dict):
            raise RobotConfigError(f"joint {i}: must be an object")
        missing = [k for k in _JOINT_REQUIRED if k not in jd]
        if missing:
            raise RobotConfigError(f"joint {i}: missing field(s) {', '.join(missing)}")
        try:
            vals = {k: float(jd[k]) for k in _JOINT_REQUIRED}
            mass = None if jd.get("mass") is None else float(jd["mass"])
        except (TypeError, ValueError) as exc:
            raise RobotConfigError(f"joint {i}: numeric fields must be numbers") from exc
        com = _transform_field(jd, "com_offset", f"joint {i}") if "com_offset" in jd else None
        if mass is not None and com is None:
            com = np.eye(4)
        joints.append(
            JointSpec(
                dh=DHRow(vals["alpha"], vals["a"], vals["d"]),
                theta_min=vals["theta_min"],
                theta_max=vals["theta_max"],
                radius=vals["radius"],
                link_semi_major=vals["link_semi_major"],
                mass=mass,
                com_offset=com,
            )
        )
    return RobotModel(
        joints=tuple(joints),
        base_transform=_transform_field(doc, "base_transform", "robot"),
        ee_offset=_transform_field(doc, "ee_offset", "robot"),
        name=str(doc.get("name", "robot")),
    )


def load_robot(document: str | bytes) -> RobotModel:
    """Parse and validate a JSON robot description."""
    try:
        doc = json.loads(document)
    except json.JSONDecodeError as exc:
        raise RobotConfigError(f"malformed robot document: {exc}") from exc
    return robot_from_dict(doc)


def load_robot_file(path: str | Path) -> RobotModel:
    return load_robot(Path(path).read_text())


def robot_to_dict(model: RobotModel) -> dict[str, Any]:
    joints = []
    for j in model.joints:
        jd = {
            "alpha": j.dh.alpha,
            "a": j.dh.a,
            "d": j.dh.d,
            "theta_min": j.theta_min,
            "theta_max": j.theta_max,
            "radius": j.radius,
            "link_semi_major": j.link_semi_major,
        }
        if j.mass is not None:
            jd["mass"] = j.mass
            jd["com_offset"] = np.asarray(j.com_offset).reshape(-1).tolist()
        joints.append(jd)
    return {
        "name": model.name,
        "base_transform": model.base_transform.reshape(-1).tolist(),
        "ee_offset": model.ee_offset.reshape(-1).tolist(),
        "joints": joints,
    }


# --------------------------------------------------------------------------
# decomposition


@dataclass(frozen=True, eq=False)
class DecompositionPlan:
    """Maps joints onto slack variables.

    ``kind == "distance"``: joint ``i`` is split into ``counts[i]`` sub-angles,
    each parameterized by a squared distance bounded in ``[lower[k], upper[k]]``.
    ``kind == "angle"``: one slack per joint, bounds are the joint angle limits.
    """

    kind: str
    shifts: np.ndarray  # (M,)
    counts: np.ndarray  # (M,) int
    sub_min: np.ndarray  # (M,) sub-angle lower bound, radians
    sub_max: np.ndarray  # (M,)
    lower: np.ndarray  # (M',) bounds of the squashed quantity per slack
    upper: np.ndarray  # (M',)
    slack_joint: np.ndarray  # (M',) owning joint of each slack
    starts: np.ndarray  # (M+1,) slack index range of joint i is starts[i]:starts[i+1]

    @property
    def n_slack(self) -> int:
        return int(self.starts[-1])

    @property
    def n_joints(self) -> int:
        return len(self.counts)

    def joint_slice(self, i: int) -> slice:
        return slice(int(self.starts[i]), int(self.starts[i + 1]))


def plan_decomposition(model: RobotModel) -> DecompositionPlan:
    shifts, counts, sub_min, sub_max = [], [], [], []
    for joint in model.joints:
        s = min(0.0, joint.theta_min)
        lo, hi = joint.theta_min - s, joint.theta_max - s
        k = max(1, math.ceil(hi / math.pi - _CEIL_SLACK))
        shifts.append(s)
        counts.append(k)
        sub_min.append(lo / k)
        sub_max.append(min(hi / k, math.pi))
    counts_arr = np.array(counts, dtype=np.int64)
    starts = np.concatenate([[0], np.cumsum(counts_arr)]).astype(np.int64)
    slack_joint = np.repeat(np.arange(len(counts)), counts_arr)
    sub_min_arr, sub_max_arr = np.array(sub_min), np.array(sub_max)
    return DecompositionPlan(
        kind="distance",
        shifts=np.array(shifts),
        counts=counts_arr,
        sub_min=sub_min_arr,
        sub_max=sub_max_arr,
        lower=(2.0 * np.sin(0.5 * sub_min_arr) ** 2)[slack_joint],
        upper=(2.0 * np.sin(0.5 * sub_max_arr) ** 2)[slack_joint],
        slack_joint=slack_joint,
        starts=starts,
    )


def plan_angles(model: RobotModel) -> DecompositionPlan:
    """One squashed angle per joint; the parameterization of the angle baseline."""
    m = model.n_joints
    ones = np.ones(m, dtype=np.int64)
    return DecompositionPlan(
        kind="angle",
        shifts=np.zeros(m),
        counts=ones,
        sub_min=model.theta_min,
        sub_max=model.theta_max,
        lower=model.theta_min,
        upper=model.theta_max,
        slack_joint=np.arange(m),
        starts=np.arange(m + 1, dtype=np.int64),
    )


def spheroid_semi_major(length: float, radius: float) -> float:
    """Smallest semi-major axis whose spheroid (foci ``length`` apart) contains
    the cylinder of ``radius`` around the focal segment."""
    f2 = (0.5 * length) ** 2
    r2 = radius * radius
    a2 = 0.5 * (2.0 * f2 + r2 + radius * math.sqrt(4.0 * f2 + r2))
    return math.sqrt(a2)
