"""Exit criteria. Each test prints one PASS/FAIL line, collected again in the terminal summary."""

import math
import time

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES
from oracles import brute_scores, brute_windows, dijkstra_cost
from scenes import disk_obstacle, straight_path
from shiftplan.astar import AStarCostParams, SearchGrid, UnreachableError, astar_search
from shiftplan.cli import main
from shiftplan.ikd import DistanceField, IncrementalKdTree
from shiftplan.rficp import CoverageParams, disk_mass, dwell_time
from shiftplan.sim.bench import run_bench
from shiftplan.sim.runner import build_plan, run_baseline, run_shift
from shiftplan.sim.scenario import generate_scenario, patch_scenario_spec, two_corridor_map
from shiftplan.surface import PointCloud, curvature_field, fit_surface
from shiftplan.swopt import SafetyParams, WindowProblem, identify_noncompliant, ikd_swopt

pytestmark = pytest.mark.acceptance


def verdict(n: int, checks: dict, elapsed: float, limit: float, detail: str = "") -> None:
    checks = dict(checks, runtime=elapsed < limit)
    ok = all(checks.values())
    failed = [k for k, v in checks.items() if not v]
    line = f"criterion {n:2d}: {'PASS' if ok else 'FAIL'} ({elapsed:.2f} s / {limit:g} s) {detail}"
    if failed:
        line += f" failed: {', '.join(failed)}"
    print(line)
    ACCEPTANCE_LINES.append(line)
    assert ok, line


def grid_cloud(fn, half, n=50):
    xs = np.linspace(-half, half, n)
    X, Y = np.meshgrid(xs, xs, indexing="ij")
    return PointCloud(np.column_stack([X.ravel(), Y.ravel(), fn(X, Y).ravel()]))


def test_c1_curvature_oracle():
    t0 = time.perf_counter()
    checks, worst = {}, []
    for r in (1.0, 2.0, 5.0):
        h = 0.6 * r
        s = fit_surface(grid_cloud(lambda x, y: np.sqrt(r * r - x * x - y * y), h), 3, (16, 16))
        inner = np.linspace(-0.6 * h, 0.6 * h, 15)  # away from the clamped boundary
        cf = curvature_field(s, inner, inner)
        k_err = np.max(np.abs(cf.K - 1 / r ** 2)) * r ** 2
        h_err = np.max(np.abs(np.abs(cf.H) - 1 / r)) * r
        checks[f"K r={r:g}"] = k_err <= 1e-2
        checks[f"H r={r:g}"] = h_err <= 1e-2
        worst.append(max(k_err, h_err))
    plane = fit_surface(grid_cloud(lambda x, y: 0.3 * x - 0.2 * y + 1.0, 1.0), 3, (16, 16))
    cf = curvature_field(plane, np.linspace(-1, 1, 25), np.linspace(-1, 1, 25))
    flat = max(np.abs(cf.K).max(), np.abs(cf.H).max())
    checks["plane"] = flat <= 1e-6
    verdict(1, checks, time.perf_counter() - t0, 5.0,
            f"worst relative K/H error {max(worst):.2e}, plane max |K|,|H| {flat:.1e}")


def test_c2_dwell_closed_form():
    rng = np.random.default_rng(2024)
    draws = []
    for _ in range(1000):
        sigma = rng.uniform(0.05, 1.0)
        R = sigma * rng.uniform(0.3, 4.0)
        p = CoverageParams(k=rng.uniform(0.5, 2.0), C_target=rng.uniform(0.0, 0.5), sigma=sigma, R=R,
                           lambda_cov=rng.uniform(0.1, 5.0))
        mass = disk_mass(R, sigma)
        eff = rng.uniform(0.01, 0.98) * mass
        draws.append((p, (eff + p.C_target) / p.k, eff, mass))
    t0 = time.perf_counter()
    worst = 0.0
    for p, a, eff, mass in draws:
        lo, hi = 0.0, 1.0
        while mass * -math.expm1(-p.lambda_cov * hi) < eff:
            hi *= 2
        for _ in range(200):  # bisection on the forward coverage model
            mid = 0.5 * (lo + hi)
            if mass * -math.expm1(-p.lambda_cov * mid) < eff:
                lo = mid
            else:
                hi = mid
            if hi - lo < 1e-13:
                break
        worst = max(worst, abs(dwell_time(a, p) - 0.5 * (lo + hi)))
    verdict(2, {"agreement": worst <= 1e-9}, time.perf_counter() - t0, 1.0, f"max |dt| {worst:.1e} s")


def sq_dist(a, b) -> float:
    return (float(a[0]) - float(b[0])) ** 2 + (float(a[1]) - float(b[1])) ** 2 + (float(a[2]) - float(b[2])) ** 2


def linear_scan(live, q) -> float:
    """Exact nearest distance: a vectorized shortlist, then scalar arithmetic on every near-tie.

    numpy's vectorized squares can differ from scalar ones in the last bit, so
    the final comparison is made in plain floats."""
    d2 = np.sum((live - q) ** 2, axis=1)
    near = live[d2 <= d2.min() * (1 + 1e-9) + 1e-300]
    return math.sqrt(min(sq_dist(p, q) for p in near))


def test_c3_ikd_exactness():
    rng = np.random.default_rng(3)
    t0 = time.perf_counter()
    pts = rng.uniform(0, 20, (10000, 3))
    tree = IncrementalKdTree(alpha_bal=0.7)
    for batch in np.array_split(pts, 100):
        tree.insert(batch)
    live = pts.copy()
    removed_ok = True
    for _ in range(2000):
        c = rng.uniform(0, 20, 3)
        h = rng.uniform(0.05, 0.6, 3)
        gone = np.all((live >= c - h) & (live <= c + h), axis=1)
        removed_ok &= tree.remove(c - h, c + h) == int(gone.sum())
        live = live[~gone]
    mismatches = 0
    for q in rng.uniform(-1, 21, (5000, 3)):
        d, near = tree.nearest(q)
        mismatches += d != linear_scan(live, q) or near is None or math.sqrt(sq_dist(near, q)) != d
    depth = tree.depth()
    bound = math.log(len(tree)) / math.log(1 / 0.7) + 2
    tree.check_invariants()
    verdict(3, {"counts": removed_ok and len(tree) == len(live), "queries": mismatches == 0,
                "depth": depth <= bound}, time.perf_counter() - t0, 10.0,
            f"{len(live)} live points, {mismatches} mismatches, depth {depth} <= {bound:.1f}")


def test_c4_astar_dijkstra_and_clearance():
    rng = np.random.default_rng(4)
    t0 = time.perf_counter()
    params = AStarCostParams(alpha_clear=0.0, hard_clearance=0.1)
    worst, compared = 0.0, 0
    agree = True
    for _ in range(100):
        obs = rng.uniform(0, 3, (40, 2))
        field = DistanceField(np.column_stack([obs, np.zeros(40)]))
        grid = SearchGrid((0.0, 0.0), 0.1, (30, 30))
        free = np.argwhere(grid.clearance(field) >= params.hard_clearance)
        a, b = rng.choice(len(free), 2, replace=False)
        s, g = tuple(free[a]), tuple(free[b])
        ref = dijkstra_cost(grid, s, g, field, params)
        try:
            cost = astar_search(grid, s, g, field, params).cost
        except UnreachableError:
            cost = math.inf
        if math.isinf(ref) or math.isinf(cost):
            agree &= math.isinf(ref) and math.isinf(cost)
            continue
        compared += 1
        worst = max(worst, abs(cost - ref))
    pts, start, goal = two_corridor_map()
    field = DistanceField(pts)
    grid = SearchGrid((0.0, 0.0), 0.1, (40, 30))
    sweep = [astar_search(grid, start, goal, field, AStarCostParams(alpha_clear=a)).clearance.min()
             for a in (0.0, 0.1, 0.5, 2.0)]
    monotone = all(y >= x for x, y in zip(sweep, sweep[1:]))
    verdict(4, {"dijkstra": agree and worst <= 1e-9, "sweep": monotone}, time.perf_counter() - t0, 30.0,
            f"{compared} maps compared, max |dcost| {worst:.1e}; clearance sweep "
            + ", ".join(f"{c:.3f}" for c in sweep))


def test_c5_noncompliant_oracle():
    rng = np.random.default_rng(5)
    params = SafetyParams()
    cases = []
    for _ in range(1000):
        n = int(rng.integers(11, 40))
        heading = np.cumsum(rng.normal(0, 0.6, n - 1))
        steps = 0.2 * np.column_stack([np.cos(heading), np.sin(heading), np.zeros(n - 1)])
        path = np.vstack([np.zeros(3), np.cumsum(steps, axis=0)])
        m = int(rng.integers(1, 12))
        cases.append((path, DistanceField(np.column_stack([rng.uniform(-3, 3, (m, 2)), np.zeros(m)]))))
    # the budget covers the implementation; the brute-force oracle is timed apart
    t0 = time.perf_counter()
    got = [[(w.lo, w.hi) for w in identify_noncompliant(path, field, params)] for path, field in cases]
    elapsed = time.perf_counter() - t0
    mismatches, flagged = 0, 0
    for g, (path, field) in zip(got, cases):
        ref = brute_windows(brute_scores(path, field, params), params.tau_safe, params.half_width)
        mismatches += g != ref
        flagged += bool(ref)
    verdict(5, {"oracle": mismatches == 0}, elapsed, 5.0,
            f"{mismatches} mismatches over 1000 paths ({flagged} with windows)")


def test_c6_window_optimization():
    t0 = time.perf_counter()
    path = straight_path()
    obstacle = disk_obstacle(5.0, 0.05)
    tree = IncrementalKdTree()
    res = ikd_swopt(path, tree, updates=[obstacle])
    field = tree.snapshot()
    d_safe = 0.3
    clear = float(field.distance(res.points).min())
    descent = all(np.all(np.diff(r.costs) <= 0) for r in res.report.reports)
    n = len(path)
    inside = {i for w in res.report.windows for i in range(w.free_range(n)[0], w.free_range(n)[1] + 1)}
    outside = np.array([i for i in range(n) if i not in inside])
    untouched = np.array_equal(res.points[outside], path[outside])
    worst = 0.0
    for w in identify_noncompliant(path, field):
        prob = WindowProblem(path + [0.0, 0.02, 0.0] * (np.arange(n) % 3 == 1)[:, None], w, field)
        x = prob.x0()
        g = prob(x)[1]
        fd = np.empty_like(x)
        for i in range(len(x)):
            e = np.zeros_like(x)
            e[i] = 1e-6
            fd[i] = (prob(x + e)[0] - prob(x - e)[0]) / 2e-6
        worst = max(worst, np.abs(g - fd).max() / max(np.abs(fd).max(), 1.0))
    verdict(6, {"clearance": clear >= d_safe - 1e-3, "descent": descent, "gradient": worst <= 1e-4,
                "locality": untouched}, time.perf_counter() - t0, 5.0,
            f"min clearance {clear:.4f}, gradient rel error {worst:.1e}, {len(res.report.windows)} windows")


@pytest.fixture(scope="module")
def patch_runs():
    out = []
    t0 = time.perf_counter()
    for seed in range(10):
        sc = generate_scenario(patch_scenario_spec(seed))
        plan = build_plan(sc)
        b = run_baseline(sc, plan=plan)
        s = run_shift(sc, plan=plan, baseline=b)
        out.append((seed, s.report, b.report, time.perf_counter() - t0))
        t0 = time.perf_counter()
    return out


def test_c7_coverage_completeness(patch_runs):
    seed, rep, _, elapsed = patch_runs[0]
    verdict(7, {"completeness": rep.demand_completeness >= 95.0}, elapsed, 60.0,
            f"seed {seed}: {rep.demand_completeness:.1f}% of {rep.demand_cells} reachable demand cells")


def test_c8_uniformity_gain(patch_runs):
    gains = np.array([s.uniformity - b.uniformity for _, s, b, _ in patch_runs])
    elapsed = sum(t for *_, t in patch_runs)
    wins = int(np.sum(gains >= 20.0))
    verdict(8, {"mean": gains.mean() >= 20.0, "runs": wins >= 9}, elapsed, 600.0,
            f"gain mean {gains.mean():.1f} pp, min {gains.min():.1f}, {wins}/10 runs >= 20 pp")


def test_c9_locality_latency():
    t0 = time.perf_counter()
    results = run_bench(0.3, 20)
    elapsed = time.perf_counter() - t0
    lat = np.concatenate([r.latencies_ms for r in results])
    sizes = [s for r in results for s in r.window_sizes]
    frac = max(f for r in results for f in r.modified_fraction)
    verdict(9, {"median": np.median(lat) < 10.0, "window size": max(sizes) <= 50, "locality": frac < 0.2},
            elapsed, 120.0, f"{len(lat)} passes, median {np.median(lat):.2f} ms, largest window {max(sizes)}"
            f" control points, max per-event share {100 * frac:.1f}%")


def test_c10_determinism(tmp_path):
    from pathlib import Path
    cfg = str(Path(__file__).resolve().parents[1] / "configs" / "patches.cfg")
    t0 = time.perf_counter()
    logs = []
    for k in range(2):
        out = tmp_path / f"run{k}" / "run.json"
        code = main(["simulate", "--scenario", cfg, "--seed", "7", "--out", str(out)])
        logs.append((code, out.read_bytes()))
    same = logs[0][1] == logs[1][1]
    verdict(10, {"exit": logs[0][0] == 0 and logs[1][0] == 0, "identical": same}, time.perf_counter() - t0, 60.0,
            f"{len(logs[0][1])} bytes per log")
