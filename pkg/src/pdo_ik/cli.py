"""Command line entry point: ``pdo-ik solve | bench | sweep | check-grad``."""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np
from scipy.spatial.transform import Rotation

from . import bench
from .constraints import load_obstacles
from .gradcheck import run_gradcheck
from .kinematics import GoalSpec
from .presets import PRESETS, preset
from .robot import RobotConfigError, RobotModel, load_robot_file, plan_angles, plan_decomposition
from .solver import SolverOptions, solve

EXIT_OK, EXIT_FAIL, EXIT_INPUT = 0, 1, 2


class InputError(Exception):
    pass


def resolve_robot(spec: str) -> RobotModel:
    """A JSON file path, or the name of a built-in chain."""
    path = Path(spec)
    if path.is_file():
        try:
            return load_robot_file(path)
        except RobotConfigError as exc:
            raise InputError(f"{spec}: {exc}") from exc
    if spec in PRESETS:
        return preset(spec)
    raise InputError(f"robot {spec!r} is neither a file nor one of: {', '.join(PRESETS)}")


def parse_goal(values: list[float]) -> GoalSpec:
    """3 numbers: position. 6: position + x-axis direction. 7: position + quaternion (x y z w)."""
    v = np.asarray(values, dtype=float)
    if len(v) not in (3, 6, 7):
        raise InputError(f"goal needs 3, 6 or 7 numbers, got {len(v)}")
    if not np.all(np.isfinite(v)):
        raise InputError("goal values must be finite")
    T = np.eye(4)
    T[:3, 3] = v[:3]
    if len(v) == 3:
        return GoalSpec.position(v)
    if len(v) == 6:
        axis = v[3:]
        n = np.linalg.norm(axis)
        if n == 0:
            raise InputError("goal x-axis must be nonzero")
        T[:3, :3] = Rotation.align_vectors([axis / n], [[1.0, 0.0, 0.0]])[0].as_matrix()
        return GoalSpec.five_dof(T)
    if np.linalg.norm(v[3:]) == 0:
        raise InputError("goal quaternion must be nonzero")
    T[:3, :3] = Rotation.from_quat(v[3:]).as_matrix()
    return GoalSpec.six_dof(T)


def parse_counts(text: str) -> list[int]:
    """``1..9`` (inclusive range) or a comma list such as ``0,5``."""
    try:
        if ".." in text:
            lo, hi = text.split("..")
            counts = list(range(int(lo), int(hi) + 1))
        else:
            counts = [int(t) for t in text.split(",") if t.strip()]
    except ValueError as exc:
        raise InputError(f"bad obstacle counts {text!r}") from exc
    if not counts or min(counts) < 0:
        raise InputError(f"bad obstacle counts {text!r}")
    return counts


def _floats(text: str) -> list[float]:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError as exc:
        raise InputError(f"bad number list {text!r}") from exc


# --------------------------------------------------------------------------
# subcommands


def cmd_solve(args) -> int:
    model = resolve_robot(args.robot)
    goal = parse_goal(args.goal)
    try:
        obstacles = load_obstacles(args.obstacles) if args.obstacles else None
    except (OSError, ValueError) as exc:
        raise InputError(f"obstacles: {exc}") from exc
    options = SolverOptions(time_limit=args.time_limit)
    omega0 = None
    if args.seed is not None:
        plan = plan_decomposition(model) if args.solver == "pdo" else plan_angles(model)
        omega0 = np.random.default_rng(args.seed).normal(size=plan.n_slack)
    report = solve(model, goal, obstacles, options, solver=args.solver, omega0=omega0)
    ok = (
        report.eps_d < args.tol_pos
        and report.eps_theta < args.tol_rot
        and report.max_violation < options.c_tol
    )
    if args.json:
        print(json.dumps({**report.to_dict(), "success": ok}))
    else:
        print(f"status      {report.status}")
        print(f"success     {ok}")
        print("theta       " + " ".join(f"{t:.6f}" for t in report.theta))
        print(f"eps_d       {report.eps_d:.3e} m")
        print(f"eps_theta   {report.eps_theta:.3e} rad")
        print(f"violation   {report.max_violation:.3e} m")
        print(f"iterations  {report.outer_iters} outer, {report.inner_iters} inner")
        print(f"time        {report.wall_time * 1e3:.2f} ms")
    return EXIT_OK if ok else EXIT_FAIL


def cmd_bench(args) -> int:
    models = [resolve_robot(r) for r in (args.robot or ["ur10_like", "franka_like"])]
    names = [m.name for m in models]
    if len(set(names)) != len(names):
        raise InputError("robot names must be distinct")
    solvers = tuple(s.strip() for s in args.solvers.split(",") if s.strip())
    if not solvers or any(s not in ("pdo", "angle") for s in solvers):
        raise InputError("solvers must be a comma list of pdo, angle")
    if args.scenarios < 1 or args.workers < 1:
        raise InputError("--scenarios and --workers must be positive")
    config = bench.BenchmarkConfig(
        obstacle_counts=parse_counts(args.obstacles_counts),
        scenarios=args.scenarios,
        solvers=solvers,
        seed=args.seed,
        dof=args.dof,
        workers=args.workers,
        options=SolverOptions(time_limit=args.time_limit),
    )
    total = len(models) * len(config.obstacle_counts) * config.scenarios * len(solvers)

    def progress(done):
        if not args.quiet:
            print(f"\r{done}/{total} solves", end="", file=sys.stderr, flush=True)

    try:
        report = bench.run_benchmark(models, config, progress)
    except bench.ScenarioError as exc:
        raise InputError(str(exc)) from exc
    if not args.quiet:
        print(file=sys.stderr)
    report.write(args.out)
    print(f"{'robot':<16}{'solver':<8}{'obs':>4}{'P_scs':>8}{'P_joint':>9}{'P_col':>8}{'P_ee':>8}{'median s':>11}")
    for s in report.summary:
        print(
            f"{s['robot']:<16}{s['solver']:<8}{s['n_obstacles']:>4}{s['P_scs']:>8.3f}{s['P_joint']:>9.3f}"
            f"{s['P_col']:>8.3f}{s['P_ee']:>8.3f}{s['runtime_median']:>11.4f}"
        )
    print(f"wrote {Path(args.out) / 'results.csv'}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    path = Path(args.input) / "results.csv"
    if not path.is_file():
        raise InputError(f"{path} not found")
    tolerances = _floats(args.tolerances)
    if not tolerances or min(tolerances) <= 0:
        raise InputError("tolerances must be positive")
    try:
        rows = bench.sweep_tolerances(bench.read_results_csv(path), tolerances)
    except (KeyError, ValueError) as exc:
        raise InputError(f"{path}: malformed results ({exc})") from exc
    out = Path(args.input) / "sweep.csv"
    with open(out, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]) if rows else ["tolerance"], lineterminator="\n")
        w.writeheader()
        w.writerows(rows)
    print(f"{'robot':<16}{'solver':<8}{'obs':>4}{'tol':>10}{'success':>9}")
    for r in rows:
        print(f"{r['robot']:<16}{r['solver']:<8}{r['n_obstacles']:>4}{r['tolerance']:>10.0e}{r['success_rate']:>9.3f}")
    return EXIT_OK


def cmd_check_grad(args) -> int:
    model = resolve_robot(args.robot) if args.robot else None
    if args.trials < 1:
        raise InputError("--trials must be positive")
    result = run_gradcheck(args.trials, args.seed, model)
    print(f"trials {result.trials}  max relative error {result.max_rel_error:.3e}  (worst trial {result.worst_trial})")
    return EXIT_OK if result.passed else EXIT_FAIL


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="pdo-ik", description="Distance-parameterized constrained inverse kinematics")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("solve", help="solve one IK problem")
    s.add_argument("--robot", required=True, help=f"robot JSON file or preset ({', '.join(PRESETS)})")
    s.add_argument("--goal", required=True, nargs="+", type=float,
                   help="x y z [ax ay az | qx qy qz qw]")
    s.add_argument("--obstacles", help="file of 'x y z' lines")
    s.add_argument("--solver", choices=("pdo", "angle"), default="pdo")
    s.add_argument("--tol-pos", type=float, default=bench.POSE_TOL)
    s.add_argument("--tol-rot", type=float, default=bench.POSE_TOL)
    s.add_argument("--time-limit", type=float, default=bench.TIME_LIMIT)
    s.add_argument("--seed", type=int, help="random initial slacks instead of the range midpoints")
    s.add_argument("--json", action="store_true")
    s.set_defaults(func=cmd_solve)

    b = sub.add_parser("bench", help="run the randomized benchmark")
    b.add_argument("--robot", action="append", help="robot file or preset; repeatable")
    b.add_argument("--obstacles-counts", default="1..9")
    b.add_argument("--scenarios", type=int, default=200)
    b.add_argument("--solvers", default="pdo,angle")
    b.add_argument("--out", required=True)
    b.add_argument("--workers", type=int, default=1)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--dof", type=int, choices=(3, 5, 6), default=5, help="goal mode")
    b.add_argument("--time-limit", type=float, default=bench.TIME_LIMIT)
    b.add_argument("--quiet", action="store_true")
    b.set_defaults(func=cmd_bench)

    w = sub.add_parser("sweep", help="re-score stored results at several tolerances")
    w.add_argument("--in", dest="input", required=True, help="bench output directory")
    w.add_argument("--tolerances", default="1e-1,1e-2,1e-3,1e-4")
    w.set_defaults(func=cmd_sweep)

    g = sub.add_parser("check-grad", help="compare analytic and finite-difference gradients")
    g.add_argument("--robot", help="fixed robot (default: random chains)")
    g.add_argument("--trials", type=int, default=100)
    g.add_argument("--seed", type=int, default=0)
    g.set_defaults(func=cmd_check_grad)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (ValueError, RobotConfigError) as exc:
        # invalid options or data caught by the library
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
