"""Synthetic robot chains modeled on common arms (modified DH, radians, meters).

These are not vendor-calibrated models; link spheres/spheroids are sized so the
spheroid of each link contains the capsule used by the independent checker.
"""

from __future__ import annotations

import math

import numpy as np

from .robot import DHRow, JointSpec, RobotModel, spheroid_semi_major

PI = math.pi


def _translate(x=0.0, y=0.0, z=0.0) -> np.ndarray:
    T = np.eye(4)
    T[:3, 3] = (x, y, z)
    return T


def build_chain(
    name: str,
    rows,
    limits,
    radii,
    *,
    base=None,
    ee=None,
    masses=None,
) -> RobotModel:
    """Assemble a chain; link spheroids and (optionally) link CoMs are derived
    from the DH geometry: link i spans joint i to joint i+1."""
    rows = [DHRow(*r) for r in rows]
    base = np.eye(4) if base is None else base
    ee = np.eye(4) if ee is None else ee
    m = len(rows)
    joints = []
    for i in range(m):
        if i + 1 < m:
            nxt = rows[i + 1]
            offset = np.array([nxt.a, -math.sin(nxt.alpha) * nxt.d, math.cos(nxt.alpha) * nxt.d])
            semi = spheroid_semi_major(float(np.linalg.norm(offset)), max(radii[i], radii[i + 1]))
        else:
            offset = ee[:3, 3]
            semi = radii[i]
        com = None
        mass = None
        if masses is not None:
            mass = float(masses[i])
            com = _translate(*(0.5 * offset))
        joints.append(
            JointSpec(
                dh=rows[i],
                theta_min=float(limits[i][0]),
                theta_max=float(limits[i][1]),
                radius=float(radii[i]),
                link_semi_major=float(semi),
                mass=mass,
                com_offset=com,
            )
        )
    return RobotModel(tuple(joints), base, ee, name)


def ur10_like() -> RobotModel:
    """6 joints, every joint rotates through [-2pi, 2pi]."""
    rows = [
        (0.0, 0.0, 0.1273),
        (PI / 2, 0.0, 0.0),
        (0.0, -0.612, 0.0),
        (0.0, -0.5723, 0.163941),
        (PI / 2, 0.0, 0.1157),
        (-PI / 2, 0.0, 0.0922),
    ]
    limits = [(-2 * PI, 2 * PI)] * 6
    radii = [0.07, 0.07, 0.06, 0.05, 0.05, 0.05]
    return build_chain("ur10_like", rows, limits, radii, ee=_translate(z=0.1))


def franka_like() -> RobotModel:
    """7 joints with tight, asymmetric limits."""
    rows = [
        (0.0, 0.0, 0.333),
        (-PI / 2, 0.0, 0.0),
        (PI / 2, 0.0, 0.316),
        (PI / 2, 0.0825, 0.0),
        (-PI / 2, -0.0825, 0.384),
        (PI / 2, 0.0, 0.0),
        (PI / 2, 0.088, 0.0),
    ]
    limits = [
        (-2.8973, 2.8973),
        (-1.7628, 1.7628),
        (-2.8973, 2.8973),
        (-3.0718, -0.0698),
        (-2.8973, 2.8973),
        (-0.0175, 3.7525),
        (-2.8973, 2.8973),
    ]
    radii = [0.06] * 7
    return build_chain("franka_like", rows, limits, radii, ee=_translate(z=0.21))


def kuka_like() -> RobotModel:
    """7 joints, symmetric limits of 120-175 degrees."""
    rows = [
        (0.0, 0.0, 0.34),
        (-PI / 2, 0.0, 0.0),
        (PI / 2, 0.0, 0.4),
        (PI / 2, 0.0, 0.0),
        (-PI / 2, 0.0, 0.4),
        (-PI / 2, 0.0, 0.0),
        (PI / 2, 0.0, 0.0),
    ]
    deg = [170, 120, 170, 120, 170, 120, 175]
    limits = [(-math.radians(v), math.radians(v)) for v in deg]
    radii = [0.065] * 7
    return build_chain("kuka_like", rows, limits, radii, ee=_translate(z=0.126))


def weighted_chain() -> RobotModel:
    """Standing 7-joint chain with link masses, for CoM-box constraints.

    The base frame points x up and z along world y, so pitch joints swing the
    chain in the world x-z plane; the roll joint adds lateral motion.
    """
    base = np.array(
        [
            [0.0, 1.0, 0.0, 0.0],
            [0.0, 0.0, 1.0, 0.0],
            [1.0, 0.0, 0.0, 0.0],
            [0.0, 0.0, 0.0, 1.0],
        ]
    )
    rows = [
        (0.0, 0.0, 0.0),  # ankle pitch
        (0.0, 0.45, 0.0),  # knee
        (0.0, 0.45, 0.0),  # hip pitch
        (PI / 2, 0.0, 0.0),  # hip roll
        (-PI / 2, 0.0, 0.0),  # torso pitch
        (0.0, 0.55, 0.0),  # shoulder
        (0.0, 0.3, 0.0),  # elbow
    ]
    limits = [
        (-0.35, 0.35),
        (-1.2, 0.05),
        (-0.8, 1.4),
        (-0.3, 0.3),
        (-0.6, 0.6),
        (-2.5, 2.5),
        (0.0, 2.3),
    ]
    radii = [0.05] * 7
    masses = [3.0, 7.0, 1.0, 1.0, 22.0, 2.5, 1.5]
    return build_chain(
        "weighted_chain", rows, limits, radii, base=base, ee=_translate(x=0.25), masses=masses
    )


PRESETS = {
    "ur10_like": ur10_like,
    "franka_like": franka_like,
    "kuka_like": kuka_like,
    "weighted_chain": weighted_chain,
}


def preset(name: str) -> RobotModel:
    try:
        return PRESETS[name]()
    except KeyError:
        raise KeyError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}") from None
