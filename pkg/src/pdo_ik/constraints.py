"""Collision and CoM constraints, the end-effector objective, and the
augmented Lagrangian value.

Constraint vectors have a fixed layout so multipliers stay aligned across
iterations: M*N joint-sphere values (joint-major), then (M-1)*N link-spheroid
values (link-major), then 6 CoM values when a CoM box is active.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .robot import RobotModel

# Box from the humanoid balance experiment, meters.
HUMANOID_COM_BOX = (np.array([-0.16, -0.07, 0.8]), np.array([0.16, 0.075, 0.94]))


@dataclass(frozen=True, eq=False)
class ComBox:
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.lower, dtype=float).reshape(3)
        hi = np.asarray(self.upper, dtype=float).reshape(3)
        if np.any(lo >= hi):
            raise ValueError("CoM box lower bound must be below the upper bound")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @classmethod
    def humanoid_default(cls) -> "ComBox":
        return cls(*HUMANOID_COM_BOX)


@dataclass(eq=False)
class ALState:
    """Multipliers and penalty of the augmented Lagrangian."""

    mu: np.ndarray
    rho: float = 1.0
    c_last: float = float("inf")

    def __post_init__(self):
        self.mu = np.asarray(self.mu, dtype=float)
        if np.any(self.mu < 0):
            raise ValueError("multipliers must be nonnegative")
        if not self.rho > 0:
            raise ValueError("penalty must be positive")

    @classmethod
    def initial(cls, n_constraints: int, rho: float = 1.0, mu: float = 0.0) -> "ALState":
        return cls(np.full(n_constraints, float(mu)), rho)


def constraint_count(model: RobotModel, n_points: int, com: bool) -> int:
    m = model.n_joints
    return m * n_points + (m - 1) * n_points + (6 if com else 0)


# --------------------------------------------------------------------------
# obstacles


def as_cloud(points) -> np.ndarray:
    if points is None:
        return np.zeros((0, 3))
    cloud = np.asarray(points, dtype=float)
    if cloud.size == 0:
        return np.zeros((0, 3))
    cloud = cloud.reshape(-1, 3)
    if not np.all(np.isfinite(cloud)):
        raise ValueError("obstacle points must be finite")
    return cloud


def parse_obstacles(text: str) -> np.ndarray:
    """Parse ``x y z`` lines; blank lines and ``#`` comments are skipped."""
    rows = []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.replace(",", " ").split()
        if len(parts) != 3:
            raise ValueError(f"line {lineno}: expected 3 coordinates, got {len(parts)}")
        try:
            rows.append([float(p) for p in parts])
        except ValueError as exc:
            raise ValueError(f"line {lineno}: {exc}") from exc
    return as_cloud(rows)


def load_obstacles(path: str | Path) -> np.ndarray:
    return parse_obstacles(Path(path).read_text())


def format_obstacles(points) -> str:
    return "".join(f"{x:.17g} {y:.17g} {z:.17g}\n" for x, y, z in as_cloud(points))


# --------------------------------------------------------------------------
# constraint values


def joint_clearance(u, o, r):
    """``r - |u - o|``; positive when ``o`` is inside the joint sphere."""
    return r - np.linalg.norm(np.asarray(u, dtype=float) - np.asarray(o, dtype=float), axis=-1)


def link_clearance(u, u_next, o, a):
    """``2a - (|u - o| + |u_next - o|)``; positive inside the link spheroid."""
    u, u_next, o = (np.asarray(x, dtype=float) for x in (u, u_next, o))
    return 2.0 * a - (np.linalg.norm(u - o, axis=-1) + np.linalg.norm(u_next - o, axis=-1))


def ee_objective(U_e, U_goal) -> float:
    U_e, U_goal = np.asarray(U_e, dtype=float), np.asarray(U_goal, dtype=float)
    if U_e.shape != U_goal.shape:
        raise ValueError(f"point sets differ in shape: {U_e.shape} vs {U_goal.shape}")
    diff = U_e - U_goal
    return 0.5 * float(np.sum(diff * diff))


def com_position(joint_world: np.ndarray, model: RobotModel) -> np.ndarray:
    """Mass-weighted mean of the per-link CoM positions in the world frame."""
    masses = model.masses
    centers = np.einsum("mij,mj->mi", joint_world[:, :3, :], model.com_points)
    return masses @ centers / masses.sum()


def com_box_values(com: np.ndarray, box: ComBox) -> np.ndarray:
    """Per axis: (lower - c, c - upper). Positive entries are violations."""
    out = np.empty(6)
    out[0::2] = box.lower - com
    out[1::2] = com - box.upper
    return out


def com_constraints(trace, model: RobotModel, box: ComBox | None = None) -> np.ndarray:
    if not model.has_mass_data:
        raise ValueError(f"{model.name}: CoM constraints need mass and com_offset on every joint")
    box = box or ComBox.humanoid_default()
    return com_box_values(com_position(trace.joint_world, model), box)


def assemble_constraints(trace, obstacles, model: RobotModel, com_box: ComBox | None = None) -> np.ndarray:
    """Evaluate all constraints for a rollout and cache distances on the trace."""
    cloud = as_cloud(obstacles)
    u = trace.u
    diffs = u[:, None, :] - cloud[None, :, :]
    dists = np.sqrt(np.sum(diffs * diffs, axis=-1))  # (M, N)
    c_joint = model.radii[:, None] - dists
    c_link = 2.0 * model.semi_majors[:, None] - (dists[:-1] + dists[1:])
    parts = [c_joint.reshape(-1), c_link.reshape(-1)]
    trace.dists, trace.c_joint, trace.c_link = dists, c_joint, c_link
    trace.c_com = trace.com = None
    if com_box is not None:
        trace.com = com_position(trace.joint_world, model)
        trace.c_com = com_box_values(trace.com, com_box)
        parts.append(trace.c_com)
    trace.c = np.concatenate(parts)
    return trace.c


def augmented_lagrangian(J: float, c, al: ALState) -> float:
    c = np.asarray(c, dtype=float)
    if c.shape != al.mu.shape:
        raise ValueError(f"{c.size} constraints but {al.mu.size} multipliers")
    cp = np.maximum(c, 0.0)
    return float(J + al.mu @ cp + 0.5 * al.rho * (cp @ cp))


def max_violation(c) -> float:
    c = np.asarray(c, dtype=float)
    return float(np.max(c, initial=0.0)) if c.size else 0.0
