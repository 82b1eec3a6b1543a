"""Distance-parameterized inverse kinematics with collision and CoM constraints."""

from .constraints import ALState, ComBox, load_obstacles
from .kinematics import GoalSpec, forward_kinematics, forward_rollout, recover_angles
from .presets import PRESETS, preset
from .robot import RobotModel, load_robot, plan_angles, plan_decomposition
from .solver import SolveReport, SolverOptions, solve, solve_ik, solve_ik_angle_baseline

__all__ = [
    "ALState", "ComBox", "GoalSpec", "PRESETS", "RobotModel", "SolveReport", "SolverOptions",
    "forward_kinematics", "forward_rollout", "load_obstacles", "load_robot", "plan_angles",
    "plan_decomposition", "preset", "recover_angles", "solve", "solve_ik", "solve_ik_angle_baseline",
]
