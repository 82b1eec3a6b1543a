"""Acceptance gate. Each criterion prints one ``CRITERION n: PASS|FAIL`` line.

Run alone with ``pytest tests/test_acceptance.py -v -s``.
"""

import math
import time

import numpy as np
import pytest

from pdo_ik._fast import FastEvaluator
from pdo_ik.bench import (
    BenchmarkConfig,
    generate_com_scenario,
    read_results_csv,
    run_benchmark,
    sweep_tolerances,
)
from pdo_ik.cli import main
from pdo_ik.constraints import ComBox, com_position, constraint_count
from pdo_ik.gradcheck import run_gradcheck
from pdo_ik.kinematics import GoalSpec, distance_from_angle, forward_kinematics, g_transform
from pdo_ik.presets import preset
from pdo_ik.robot import DHRow, plan_decomposition
from pdo_ik.solver import SolverOptions, solve

BENCH_ROBOTS = ("ur10_like", "franka_like", "kuka_like")
HEADLINE_ROBOTS = ("ur10_like", "franka_like")  # 6- and 7-joint chains
SCENARIOS = 200


def verdict(capsys, n, ok, detail):
    with capsys.disabled():
        print(f"\nCRITERION {n}: {'PASS' if ok else 'FAIL'}  {detail}")
    assert ok, detail


@pytest.fixture(scope="module")
def benchmark():
    models = [preset(name) for name in BENCH_ROBOTS]
    config = BenchmarkConfig(obstacle_counts=[0, 5], scenarios=SCENARIOS, solvers=("pdo", "angle"), seed=0)
    report = run_benchmark(models, config)
    cells = {(s["robot"], s["solver"], s["n_obstacles"]): s for s in report.summary}
    return report, cells


def elementary_dh(theta, alpha, a, d):
    """Rx(alpha) Tx(a) Rz(theta) Tz(d), multiplied out numerically."""
    ca, sa, ct, st = math.cos(alpha), math.sin(alpha), math.cos(theta), math.sin(theta)
    Rx = np.array([[1, 0, 0, 0], [0, ca, -sa, 0], [0, sa, ca, 0], [0, 0, 0, 1.0]])
    Tx = np.eye(4)
    Tx[0, 3] = a
    Rz = np.array([[ct, -st, 0, 0], [st, ct, 0, 0], [0, 0, 1, 0], [0, 0, 0, 1.0]])
    Tz = np.eye(4)
    Tz[2, 3] = d
    return Rx @ Tx @ Rz @ Tz


def test_criterion_1_parameterization_exact(capsys):
    rng = np.random.default_rng(1)
    t0 = time.perf_counter()
    worst = 0.0
    for _ in range(1000):
        theta = rng.uniform(0.0, math.pi)
        alpha, a, d = rng.uniform(-math.pi, math.pi), rng.uniform(-1, 1), rng.uniform(-1, 1)
        G = g_transform(float(distance_from_angle(theta)), DHRow(alpha, a, d))
        worst = max(worst, float(np.max(np.abs(G - elementary_dh(theta, alpha, a, d)))))
    elapsed = time.perf_counter() - t0
    verdict(capsys, 1, worst <= 1e-12 and elapsed < 1.0, f"max entry error {worst:.2e}, {elapsed:.3f} s")


def test_criterion_2_gradient_check(capsys):
    t0 = time.perf_counter()
    result = run_gradcheck(trials=100, seed=0)
    elapsed = time.perf_counter() - t0
    verdict(capsys, 2, result.max_rel_error < 1e-5 and elapsed < 30.0,
            f"max relative error {result.max_rel_error:.2e} over {result.trials} problems, {elapsed:.1f} s")


def test_criterion_3_zero_limit_violations(benchmark, capsys):
    report, _ = benchmark
    bad = 0
    for row in report.rows:
        model = preset(row.robot)
        theta = np.asarray(row.theta)
        bad += int(np.any((theta < model.theta_min) | (theta > model.theta_max)))
    pdo = sum(r.solver == "pdo" for r in report.rows)
    ok = bad == 0 and pdo >= 1000
    verdict(capsys, 3, ok, f"{bad} violating solves among {len(report.rows)} ({pdo} distance-parameterized)")


def test_criterion_4_obstacle_free(benchmark, capsys):
    _, cells = benchmark
    rates = {name: cells[(name, "pdo", 0)]["P_scs"] for name in HEADLINE_ROBOTS}
    verdict(capsys, 4, all(r >= 0.95 for r in rates.values()),
            "P_scs " + ", ".join(f"{k}={v:.3f}" for k, v in rates.items()))


def test_criterion_5_cluttered_vs_angle_baseline(benchmark, capsys):
    _, cells = benchmark
    pdo = {name: cells[(name, "pdo", 5)]["P_scs"] for name in HEADLINE_ROBOTS}
    ang = {name: cells[(name, "angle", 5)]["P_scs"] for name in HEADLINE_ROBOTS}
    pts = {name: cells[(name, "pdo", 5)]["mean_points"] for name in HEADLINE_ROBOTS}
    within = all(pdo[n] >= ang[n] - 0.02 for n in HEADLINE_ROBOTS)
    tight_better = pdo["franka_like"] > ang["franka_like"]
    detail = "; ".join(f"{n} pdo={pdo[n]:.3f} angle={ang[n]:.3f} pts={pts[n]:.0f}" for n in HEADLINE_ROBOTS)
    verdict(capsys, 5, within and tight_better, detail)


def test_criterion_6_accuracy_consistency(benchmark, capsys, tmp_path):
    report, _ = benchmark
    report.write(tmp_path)
    sweep = sweep_tolerances(read_results_csv(tmp_path / "results.csv"), (1e-1, 1e-4))
    rates: dict = {}
    for r in sweep:
        if r["solver"] == "pdo":
            rates.setdefault((r["robot"], r["n_obstacles"]), {})[r["tolerance"]] = r["success_rate"]
    gaps = {k: v[1e-1] - v[1e-4] for k, v in rates.items()}
    worst = max(gaps, key=gaps.get)
    verdict(capsys, 6, gaps[worst] <= 0.05,
            f"largest drop {gaps[worst] * 100:.1f} pp ({worst[0]}, {worst[1]} obstacles) over {len(gaps)} cells")


def median_pass_times(sizes, rounds=2000):
    """Median value+gradient time per cloud size, calls interleaved so drift hits every size alike."""
    model = preset("franka_like")
    plan = plan_decomposition(model)
    rng = np.random.default_rng(5)
    goal = GoalSpec.six_dof(forward_kinematics(model, 0.5 * (model.theta_min + model.theta_max))[1])
    omega = rng.normal(size=plan.n_slack)
    evals = {}
    for n in sizes:
        pts = rng.uniform(-0.8, 0.8, size=(n, 3)) + [0, 0, 0.5]
        ev = FastEvaluator(model, plan, goal, pts)
        mu = np.ones(constraint_count(model, n, False))
        ev.value_and_grad(omega, mu, 10.0)
        evals[n] = (ev, mu)
    times = {n: np.empty(rounds) for n in sizes}
    for i in range(rounds):
        for n, (ev, mu) in evals.items():
            t0 = time.perf_counter()
            ev.value_and_grad(omega, mu, 10.0)
            times[n][i] = time.perf_counter() - t0
    return {n: float(np.median(t)) for n, t in times.items()}


def test_criterion_7_linear_scaling(capsys):
    t = median_pass_times((100, 1000))
    ratio = t[1000] / t[100]
    verdict(capsys, 7, 8.0 <= ratio <= 12.0,
            f"t(1000)/t(100) = {ratio:.2f} ({t[1000] * 1e6:.1f} us / {t[100] * 1e6:.1f} us)")


def test_pass_time_marginal_cost_is_constant():
    # linear in N once the fixed per-call chain cost is removed
    t = median_pass_times((100, 1000, 4000), rounds=1000)
    low = (t[1000] - t[100]) / 900
    high = (t[4000] - t[1000]) / 3000
    assert low > 0 and high > 0
    assert 0.8 <= high / low <= 1.25


def test_criterion_8_desk_scale_runtime(benchmark, capsys):
    _, cells = benchmark
    cell = cells[("franka_like", "pdo", 5)]
    verdict(capsys, 8, cell["runtime_median"] < 0.5,
            f"median {cell['runtime_median'] * 1e3:.2f} ms with {cell['mean_points']:.0f} points on average")


def test_criterion_9_com_box(capsys):
    model = preset("weighted_chain")
    box = ComBox.humanoid_default()
    options = SolverOptions()
    inside = 0
    for k in range(100):
        scenario = generate_com_scenario(model, box, np.random.SeedSequence([9, k]))
        r = solve(model, scenario.goal, None, options, com_box=box)
        com = com_position(forward_kinematics(model, r.theta)[0], model)
        excess = max(float(np.max(box.lower - com)), float(np.max(com - box.upper)), 0.0)
        inside += excess <= options.c_tol
    verdict(capsys, 9, inside >= 90, f"{inside}/100 solutions with CoM inside the box")


def test_criterion_10_deterministic_bench(capsys, tmp_path):
    argv = ["bench", "--robot", "ur10_like", "--robot", "franka_like", "--obstacles-counts", "0,4",
            "--scenarios", "10", "--seed", "3", "--quiet"]
    outputs = []
    for name, extra in (("a", []), ("b", []), ("c", ["--workers", "2"])):
        assert main(argv + ["--out", str(tmp_path / name), *extra]) == 0
        outputs.append((tmp_path / name / "results.csv").read_bytes())
    capsys.readouterr()
    same = outputs[0] == outputs[1] == outputs[2]
    rows = outputs[0].count(b"\n") - 1
    verdict(capsys, 10, same, f"{rows} rows, three runs (one with 2 workers) byte-identical: {same}")

