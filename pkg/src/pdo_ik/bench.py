"""Scenario generation, independent evaluation and batch benchmarking.

Evaluation never touches solver-side constraint code: poses come from the
trigonometric FK and collisions from exact point-to-capsule distances.
"""

from __future__ import annotations

import csv
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .constraints import ComBox, com_position
from .kinematics import GoalSpec, forward_kinematics
from .robot import RobotModel
from .solver import SolveReport, SolverOptions, solve

# Paper protocol values
CENTER_LOW = np.array([-0.6, -0.6, 0.0])
CENTER_HIGH = np.array([0.6, 0.6, 1.2])
SCALE_RANGE = (1.0, 3.0)
VOXEL_LEAF = 0.1
POSE_TOL = 0.01
JOINT_TOL_FRACTION = 0.01
TIME_LIMIT = 60.0
MAX_RESAMPLE = 1000
SWEEP_TOLERANCES = (1e-1, 1e-2, 1e-3, 1e-4)

# Base object size before scaling, meters
SPHERE_RADIUS = (0.03, 0.06)
BOX_HALF_EXTENT = (0.02, 0.06)
SURFACE_DENSITY = 2500.0  # samples per square meter before downsampling
MIN_SURFACE_SAMPLES = 64


class ScenarioError(RuntimeError):
    """Scenario generation could not place obstacles."""


# --------------------------------------------------------------------------
# point clouds


def voxel_downsample(points, leaf: float = VOXEL_LEAF) -> np.ndarray:
    """Centroid of the points in each occupied voxel of an origin-anchored grid.

    Output is ordered by voxel index, so it does not depend on input order.
    """
    if not leaf > 0:
        raise ValueError("leaf size must be positive")
    pts = np.asarray(points, dtype=float).reshape(-1, 3)
    if len(pts) == 0:
        return pts.copy()
    keys = np.floor(pts / leaf).astype(np.int64)
    uniq, inverse = np.unique(keys, axis=0, return_inverse=True)
    inverse = inverse.reshape(-1)
    sums = np.zeros((len(uniq), 3))
    np.add.at(sums, inverse, pts)
    counts = np.bincount(inverse, minlength=len(uniq))
    return sums / counts[:, None]


def _sphere_surface(rng, radius, n):
    v = rng.normal(size=(n, 3))
    return radius * v / np.linalg.norm(v, axis=1, keepdims=True)


def _box_surface(rng, half, n):
    hx, hy, hz = half
    areas = np.array([hy * hz, hy * hz, hx * hz, hx * hz, hx * hy, hx * hy])
    face = rng.choice(6, size=n, p=areas / areas.sum())
    pts = rng.uniform(-1.0, 1.0, size=(n, 3)) * half
    axis = face // 2
    sign = np.where(face % 2 == 0, -1.0, 1.0)
    pts[np.arange(n), axis] = sign * half[axis]
    return pts


def sample_obstacle(rng: np.random.Generator) -> tuple[str, np.ndarray, np.ndarray]:
    """One synthetic object: (shape, center, downsampled surface cloud)."""
    center = rng.uniform(CENTER_LOW, CENTER_HIGH)
    scale = rng.uniform(*SCALE_RANGE)
    if rng.random() < 0.5:
        radius = rng.uniform(*SPHERE_RADIUS) * scale
        n = max(MIN_SURFACE_SAMPLES, int(SURFACE_DENSITY * 4.0 * math.pi * radius**2))
        surface, shape = _sphere_surface(rng, radius, n), "sphere"
    else:
        half = rng.uniform(*BOX_HALF_EXTENT, size=3) * scale
        area = 8.0 * (half[0] * half[1] + half[1] * half[2] + half[0] * half[2])
        n = max(MIN_SURFACE_SAMPLES, int(SURFACE_DENSITY * area))
        surface, shape = _box_surface(rng, half, n), "box"
    return shape, center, voxel_downsample(surface + center)


# --------------------------------------------------------------------------
# independent collision check


def _point_segment_distance(p: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    ab = b - a
    denom = float(ab @ ab)
    if denom == 0.0:
        return np.linalg.norm(p - a, axis=1)
    t = np.clip((p - a) @ ab / denom, 0.0, 1.0)
    return np.linalg.norm(p - (a + t[:, None] * ab), axis=1)


@dataclass(frozen=True)
class CollisionResult:
    collision_free: bool
    margin: float  # smallest clearance over all shapes and points; < 0 is penetration


def independent_collision_check(model: RobotModel, theta, obstacles) -> CollisionResult:
    """Joint spheres plus one capsule per link (radius = larger end radius).

    A point exactly on a surface is not a collision.
    """
    pts = np.asarray(obstacles, dtype=float).reshape(-1, 3)
    if len(pts) == 0:
        return CollisionResult(True, math.inf)
    world, _ = forward_kinematics(model, theta)
    u = world[:, :3, 3]
    radii = model.radii
    margin = math.inf
    for i in range(model.n_joints):
        margin = min(margin, float(np.min(np.linalg.norm(pts - u[i], axis=1))) - radii[i])
    for i in range(model.n_joints - 1):
        r = max(radii[i], radii[i + 1])
        margin = min(margin, float(np.min(_point_segment_distance(pts, u[i], u[i + 1]))) - r)
    return CollisionResult(margin >= 0.0, margin)


# --------------------------------------------------------------------------
# scenarios


@dataclass(eq=False)
class Scenario:
    scenario_id: str
    robot: str
    seed: int
    goal: GoalSpec
    obstacles: np.ndarray
    theta_gt: np.ndarray
    n_obstacles: int = 0
    com_box: ComBox | None = None

    @property
    def n_points(self) -> int:
        return len(self.obstacles)


def make_goal(T: np.ndarray, dof: int) -> GoalSpec:
    if dof == 3:
        return GoalSpec.position(T[:3, 3])
    if dof == 5:
        return GoalSpec.five_dof(T)
    if dof == 6:
        return GoalSpec.six_dof(T)
    raise ValueError("goal dof must be 3, 5 or 6")


def _seed_int(seed) -> int:
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    return int(ss.generate_state(1)[0])


def generate_scenario(
    model: RobotModel,
    n_obstacles: int,
    seed,
    *,
    dof: int = 5,
    scenario_id: str | None = None,
) -> Scenario:
    """Random reachable target plus obstacles clear of the sampled configuration."""
    if n_obstacles < 0:
        raise ValueError("n_obstacles must be >= 0")
    rng = np.random.default_rng(seed)
    theta = rng.uniform(model.theta_min, model.theta_max)
    _, T_e = forward_kinematics(model, theta)
    clouds = []
    attempts = 0
    while len(clouds) < n_obstacles:
        attempts += 1
        if attempts > MAX_RESAMPLE:
            raise ScenarioError(f"could not place {n_obstacles} obstacles in {MAX_RESAMPLE} attempts")
        _, _, cloud = sample_obstacle(rng)
        if independent_collision_check(model, theta, cloud).collision_free:
            clouds.append(cloud)
    obstacles = np.concatenate(clouds) if clouds else np.zeros((0, 3))
    return Scenario(
        scenario_id=scenario_id or f"{model.name}-{n_obstacles:02d}",
        robot=model.name,
        seed=_seed_int(seed),
        goal=make_goal(T_e, dof),
        obstacles=obstacles,
        theta_gt=theta,
        n_obstacles=n_obstacles,
    )


def generate_com_scenario(model: RobotModel, box: ComBox, seed, *, scenario_id: str | None = None) -> Scenario:
    """Position target from a configuration whose CoM lies inside ``box``."""
    rng = np.random.default_rng(seed)
    for _ in range(100 * MAX_RESAMPLE):
        theta = rng.uniform(model.theta_min, model.theta_max)
        world, T_e = forward_kinematics(model, theta)
        com = com_position(world, model)
        if np.all(com > box.lower) and np.all(com < box.upper):
            return Scenario(
                scenario_id=scenario_id or f"{model.name}-com",
                robot=model.name,
                seed=_seed_int(seed),
                goal=make_goal(T_e, 3),
                obstacles=np.zeros((0, 3)),
                theta_gt=theta,
                com_box=box,
            )
    raise ScenarioError("no configuration with CoM inside the box was found")


# --------------------------------------------------------------------------
# evaluation


@dataclass
class Verdict:
    success: bool
    in_time: bool
    collision_free: bool
    joint_ok: bool
    pose_ok: bool
    eps_d: float
    eps_theta: float
    joint_violation: float  # largest violation as a fraction of the joint range
    clearance: float


def evaluate_solution(
    scenario: Scenario,
    model: RobotModel,
    report: SolveReport,
    *,
    tol_pos: float = POSE_TOL,
    tol_rot: float = POSE_TOL,
    time_limit: float = TIME_LIMIT,
) -> Verdict:
    from .solver import pose_errors

    theta = np.asarray(report.theta, dtype=float)
    span = model.theta_max - model.theta_min
    over = np.maximum(model.theta_min - theta, 0.0) + np.maximum(theta - model.theta_max, 0.0)
    joint_violation = float(np.max(over / span))
    eps_d, eps_theta = pose_errors(model, theta, scenario.goal)
    col = independent_collision_check(model, theta, scenario.obstacles)
    in_time = report.wall_time <= time_limit and report.status != "time-limit"
    joint_ok = joint_violation <= JOINT_TOL_FRACTION
    pose_ok = eps_d < tol_pos and eps_theta < tol_rot
    return Verdict(
        success=in_time and col.collision_free and joint_ok and pose_ok,
        in_time=in_time,
        collision_free=col.collision_free,
        joint_ok=joint_ok,
        pose_ok=pose_ok,
        eps_d=eps_d,
        eps_theta=eps_theta,
        joint_violation=joint_violation,
        clearance=col.margin,
    )


# --------------------------------------------------------------------------
# benchmark


RESULT_FIELDS = [
    "scenario_id", "robot", "n_obstacles", "n_points", "solver", "status",
    "eps_d", "eps_theta", "max_violation", "clearance", "joint_violation",
    "in_time", "collision_free", "joint_ok", "pose_ok", "success",
    "outer_iters", "inner_iters", "theta",
]
TIMING_FIELDS = ["scenario_id", "solver", "wall_time"]


@dataclass
class ResultRow:
    scenario_id: str
    robot: str
    n_obstacles: int
    n_points: int
    solver: str
    status: str
    eps_d: float
    eps_theta: float
    max_violation: float
    clearance: float
    joint_violation: float
    in_time: bool
    collision_free: bool
    joint_ok: bool
    pose_ok: bool
    success: bool
    outer_iters: int
    inner_iters: int
    theta: list
    wall_time: float = field(default=0.0, compare=False)

    def csv_row(self) -> dict:
        out = {}
        for key in RESULT_FIELDS:
            v = getattr(self, key)
            if isinstance(v, bool):
                v = int(v)
            elif isinstance(v, float):
                v = repr(v)
            elif key == "theta":
                v = " ".join(repr(float(t)) for t in v)
            out[key] = v
        return out


@dataclass
class BenchmarkConfig:
    obstacle_counts: list
    scenarios: int = 200
    solvers: tuple = ("pdo", "angle")
    seed: int = 0
    dof: int = 5
    workers: int = 1
    options: SolverOptions = field(default_factory=SolverOptions)


def scenario_seed(seed: int, robot_index: int, n_obstacles: int, k: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([seed, robot_index, n_obstacles, k])


def _run_one(args) -> list[ResultRow]:
    model, robot_index, n_obs, k, cfg = args
    sid = f"{model.name}-{n_obs:02d}-{k:04d}"
    scenario = generate_scenario(model, n_obs, scenario_seed(cfg.seed, robot_index, n_obs, k), dof=cfg.dof, scenario_id=sid)
    return [run_scenario(scenario, model, solver, cfg.options) for solver in cfg.solvers]


def run_scenario(scenario: Scenario, model: RobotModel, solver: str, options: SolverOptions) -> ResultRow:
    report = solve(model, scenario.goal, scenario.obstacles, options, solver=solver, com_box=scenario.com_box)
    v = evaluate_solution(scenario, model, report, time_limit=options.time_limit)
    return ResultRow(
        scenario_id=scenario.scenario_id,
        robot=scenario.robot,
        n_obstacles=scenario.n_obstacles,
        n_points=scenario.n_points,
        solver=solver,
        status=report.status,
        eps_d=v.eps_d,
        eps_theta=v.eps_theta,
        max_violation=report.max_violation,
        clearance=v.clearance,
        joint_violation=v.joint_violation,
        in_time=v.in_time,
        collision_free=v.collision_free,
        joint_ok=v.joint_ok,
        pose_ok=v.pose_ok,
        success=v.success,
        outer_iters=report.outer_iters,
        inner_iters=report.inner_iters,
        theta=[float(t) for t in report.theta],
        wall_time=report.wall_time,
    )


def _warm_up():
    # compile the kernel before any timed solve
    from .presets import ur10_like

    model = ur10_like()
    solve(model, GoalSpec.position([0.5, 0.2, 0.5]), np.zeros((1, 3)) + 5.0, SolverOptions(k_max=1))
    solve(model, GoalSpec.position([0.5, 0.2, 0.5]), None, SolverOptions(k_max=1), solver="angle")


@dataclass
class BenchmarkReport:
    rows: list
    summary: list

    def write(self, out_dir: str | Path) -> None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_results_csv(self.rows, out / "results.csv")
        with open(out / "timings.csv", "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=TIMING_FIELDS, lineterminator="\n")
            w.writeheader()
            for r in self.rows:
                w.writerow({"scenario_id": r.scenario_id, "solver": r.solver, "wall_time": repr(r.wall_time)})
        (out / "summary.json").write_text(json.dumps(self.summary, indent=2) + "\n")


def write_results_csv(rows, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=RESULT_FIELDS, lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow(r.csv_row())


def read_results_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def summarize(rows) -> list[dict]:
    """Rates per (robot, solver, obstacle count) over all solves in the cell."""
    cells: dict = {}
    for r in rows:
        cells.setdefault((r.robot, r.solver, r.n_obstacles), []).append(r)
    out = []
    for (robot, solver, n_obs), group in sorted(cells.items()):
        n = len(group)
        times = np.array([r.wall_time for r in group])
        out.append(
            {
                "robot": robot,
                "solver": solver,
                "n_obstacles": n_obs,
                "scenarios": n,
                "mean_points": float(np.mean([r.n_points for r in group])),
                "P_scs": sum(r.success for r in group) / n,
                "P_joint": sum(not r.joint_ok for r in group) / n,
                "P_col": sum(not r.collision_free for r in group) / n,
                "P_ee": sum(not r.pose_ok for r in group) / n,
                "runtime_q05": float(np.quantile(times, 0.05)),
                "runtime_median": float(np.median(times)),
                "runtime_q95": float(np.quantile(times, 0.95)),
                "mean_log10_runtime": float(np.mean(np.log10(np.maximum(times, 1e-9)))),
            }
        )
    return out


def run_benchmark(models, config: BenchmarkConfig, progress=None) -> BenchmarkReport:
    """Solve every scenario with every solver; rows are sorted by scenario id."""
    tasks = [
        (model, ri, n_obs, k, config)
        for ri, model in enumerate(models)
        for n_obs in config.obstacle_counts
        for k in range(config.scenarios)
    ]
    rows: list[ResultRow] = []
    if config.workers > 1:
        with ProcessPoolExecutor(config.workers, initializer=_warm_up) as pool:
            for batch in pool.map(_run_one, tasks, chunksize=4):
                rows.extend(batch)
                if progress:
                    progress(len(rows))
    else:
        _warm_up()
        for task in tasks:
            rows.extend(_run_one(task))
            if progress:
                progress(len(rows))
    rows.sort(key=lambda r: (r.scenario_id, r.solver))
    return BenchmarkReport(rows, summarize(rows))


# --------------------------------------------------------------------------
# tolerance sweep


def _flag(v) -> bool:
    return str(v).strip().lower() in ("1", "true")


def sweep_tolerances(rows: list[dict], tolerances=SWEEP_TOLERANCES) -> list[dict]:
    """Re-score stored results at each pose tolerance (position and rotation alike)."""
    cells: dict = {}
    for r in rows:
        cells.setdefault((r["robot"], r["solver"], int(r["n_obstacles"])), []).append(r)
    out = []
    for (robot, solver, n_obs), group in sorted(cells.items()):
        for tol in tolerances:
            ok = sum(
                _flag(r["in_time"]) and _flag(r["collision_free"]) and _flag(r["joint_ok"])
                and float(r["eps_d"]) < tol and float(r["eps_theta"]) < tol
                for r in group
            )
            out.append(
                {"robot": robot, "solver": solver, "n_obstacles": n_obs, "tolerance": tol,
                 "scenarios": len(group), "success_rate": ok / len(group)}
            )
    return out
