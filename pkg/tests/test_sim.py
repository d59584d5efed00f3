import json
import math
from dataclasses import replace

import numpy as np
import pytest
from scipy.integrate import quad

from shiftplan.ikd import DistanceField
from shiftplan.rficp import CoverageParams, SemanticField
from shiftplan.sim.coverage import CoverageLedger, deposit_coverage
from shiftplan.sim.metrics import ExecutionLog, MetricThresholds, compute_metrics, energy, uniformity
from shiftplan.sim.runner import (SimConfig, build_plan, load_records, replay_metrics, run_baseline, run_shift,
                                  time_budget)
from shiftplan.sim.scenario import (ConfigError, Cylinder, ObstacleEvent, ObstacleSpec, Patch, ScenarioSpec,
                                    SemanticSpec, TerrainSpec, cylinder_points, generate_scenario,
                                    moving_obstacle, patch_scenario_spec)


def flat_spec(level=0.0, events=(), size=(5.0, 5.0)):
    return ScenarioSpec(terrain=TerrainSpec("flat", size, (20, 20)), semantic=SemanticSpec("uniform", level=level),
                        obstacles=ObstacleSpec(events=events))


# -- scenarios -------------------------------------------------------------------


def test_flat_uniform_zero():
    sc = generate_scenario(flat_spec())
    assert np.all(sc.semantic.values == 0.0)
    assert np.all(sc.cloud.points[:, 2] == 0.0)
    assert sc.timeline == [] and len(sc.static_points) == 0


def test_single_patch_disk_rule():
    spec = ScenarioSpec(semantic=SemanticSpec("patches", background=0.1, patches=(Patch(5.0, 5.0, 1.3, 0.8),)))
    sem = generate_scenario(spec).semantic
    X, Y = np.meshgrid(sem.xs(), sem.ys(), indexing="ij")
    inside = (X - 5.0) ** 2 + (Y - 5.0) ** 2 <= 1.3 ** 2
    assert np.all(sem.values[inside] == 0.8) and np.all(sem.values[~inside] == 0.1)


def test_generation_deterministic():
    spec = patch_scenario_spec(3)
    a, b = generate_scenario(spec), generate_scenario(spec)
    assert np.array_equal(a.cloud.points, b.cloud.points)
    assert np.array_equal(a.semantic.values, b.semantic.values)
    assert np.array_equal(a.static_points, b.static_points)
    assert [(u.time, u.action) for u in a.timeline] == [(u.time, u.action) for u in b.timeline]
    c = generate_scenario(spec, seed=4)
    assert not np.array_equal(a.cloud.points, c.cloud.points)


def test_spikes_and_noise_injected():
    spec = ScenarioSpec(terrain=TerrainSpec("flat", (5.0, 5.0), (20, 20), noise=0.01, spikes=4, spike_height=0.7))
    z = generate_scenario(spec).cloud.points[:, 2]
    assert np.sum(z > 0.5) == 4 and 0 < np.std(z[z < 0.5]) < 0.02


def test_patch_levels_spread():
    for seed in range(5):
        spec = patch_scenario_spec(seed)
        lv = sorted(p.level for p in spec.semantic.patches)
        assert lv[0] < 0.3 and lv[-1] > 0.9
        for i, p in enumerate(spec.semantic.patches):
            for q in spec.semantic.patches[i + 1:]:
                assert math.hypot(p.x - q.x, p.y - q.y) > p.radius + q.radius


def test_config_errors():
    for make in (lambda: TerrainSpec("lunar"), lambda: TerrainSpec(size=(0, 1)), lambda: SemanticSpec("x"),
                 lambda: SemanticSpec(level=1.5), lambda: ObstacleEvent(1.0, "move", Cylinder(0, 0, 1)),
                 lambda: ObstacleEvent(-1.0, "add", Cylinder(0, 0, 1)),
                 lambda: moving_obstacle(Cylinder(0, 0, 1), (1, 0), 0, 1, tick=0)):
        with pytest.raises(ConfigError):
            make()
    assert issubclass(ConfigError, ValueError)


def test_cylinder_points():
    c = Cylinder(1.0, 2.0, 0.3, 1.0)
    pts = cylinder_points(c, 0.08, base=0.5)
    r = np.hypot(pts[:, 0] - 1.0, pts[:, 1] - 2.0)
    assert r.max() == pytest.approx(0.3) and r.min() == 0.0
    assert pts[:, 2].min() == 0.5 and pts[:, 2].max() == pytest.approx(1.5)


def test_moving_obstacle_events():
    ev = moving_obstacle(Cylinder(0.0, 0.0, 0.2), (1.0, 0.0), 2.0, 2.3, tick=0.1)
    assert [e.action for e in ev] == ["add"] + ["remove", "add"] * 3
    assert ev[-1].cylinder.x == pytest.approx(0.3) and ev[-1].time == pytest.approx(2.3)
    assert ev[-2].cylinder == ev[-3].cylinder  # each tick removes what the previous one added


# -- coverage deposition ----------------------------------------------------------------


def ledger_and_params(level=1.0, n=41):
    sem = SemanticField((0.0, 0.0), 0.25, np.full((n, n), level))
    return CoverageLedger(sem), CoverageParams(sigma=0.4, R=1.2, lambda_cov=1.0)


def test_deposit_zero_time():
    led, p = ledger_and_params()
    deposit_coverage(led, (5.0, 5.0), 0.0, p)
    assert np.all(led.c == 0.0)
    with pytest.raises(ValueError):
        deposit_coverage(led, (5.0, 5.0), -1.0, p)


def test_deposit_limit_is_kernel_times_area():
    led, p = ledger_and_params()
    deposit_coverage(led, (5.0, 5.0), 1e3, p)
    C = led.centers()
    d2 = np.sum((C - [5.0, 5.0]) ** 2, axis=-1)
    G = np.where(d2 <= p.R ** 2, np.exp(-d2 / (2 * p.sigma ** 2)) / (math.sqrt(2 * math.pi) * p.sigma), 0.0)
    np.testing.assert_array_equal(led.c, G * led.cell_area)


def test_deposit_total_matches_quadrature():
    led, p = ledger_and_params()
    deposit_coverage(led, (5.1, 4.93), 1e3, p)
    g = lambda r: math.exp(-r * r / (2 * p.sigma ** 2)) / (math.sqrt(2 * math.pi) * p.sigma)  # noqa: E731
    ref = 2 * math.pi * quad(lambda r: g(r) * r, 0, p.R)[0]
    assert led.c.sum() == pytest.approx(ref, rel=0.02)


def test_deposit_monotone_and_saturating():
    led, p = ledger_and_params(n=21)
    p = replace(p, sigma=0.1, R=0.3)  # peaked kernel so cells saturate
    rng = np.random.default_rng(0)
    prev = led.c.copy()
    for _ in range(300):
        deposit_coverage(led, rng.uniform(0, 5, 2), rng.uniform(0, 20), p)
        assert np.all(led.c >= prev) and led.c.max() <= 1.0
        prev = led.c.copy()
    for _ in range(6):
        deposit_coverage(led, (2.5, 2.5), 50.0, p)
    assert led.c.max() == 1.0


# -- metrics -------------------------------------------------------------------


def line_log(n, v=1.0, step=0.25, y=0.0, dwell=0.0):
    pos = np.column_stack([step * np.arange(n), np.full(n, y), np.zeros(n)])
    s = np.full(n, step)
    move = s / v
    idle = np.maximum(dwell - move, 0.0)
    return ExecutionLog(pos, np.full(n, float(v)), s, move, idle, np.zeros(n, bool), np.cumsum(move + idle),
                        np.full(n, dwell), np.full(n, -1))


def test_uniformity_two_levels():
    sem = SemanticField((0.0, 0.0), 0.25, np.ones((4, 4)))
    led = CoverageLedger(sem)
    led.c[:2] = 0.4
    led.c[2:] = 0.8
    p = CoverageParams(k=1.0, C_target=0.0)
    rep = compute_metrics(led, line_log(4), sem, p, thresholds=MetricThresholds(c_done=0.3))
    assert rep.uniformity == pytest.approx(100 * (1 - 0.2 / 0.6), abs=1e-9)
    assert rep.uniformity == pytest.approx(66.67, abs=5e-3)
    assert rep.completeness == 100.0 and rep.overlap == 0.0


def test_uniformity_edge_cases():
    assert uniformity([]) == 0.0 and uniformity([0.0, 0.0]) == 0.0
    assert uniformity([1.0, 1.0]) == 100.0
    assert uniformity([0.0, 0.0, 0.0, 10.0]) == 0.0  # CoV above 1 floors at zero


def test_revisited_steps_count_as_overlap():
    sem = SemanticField((0.0, 0.0), 0.25, np.ones((8, 2)))
    led = CoverageLedger(sem)
    log = line_log(8)
    log.revisit[[2, 3]] = True
    rep = compute_metrics(led, log, sem, CoverageParams(C_target=0.0))
    assert rep.overlap == pytest.approx(25.0)
    assert rep.completeness == 0.0 and rep.energy_efficiency == 0.0
    for v in (rep.completeness, rep.demand_completeness, rep.overlap, rep.uniformity):
        assert 0.0 <= v <= 100.0


def test_energy_model():
    log = line_log(10, v=0.5, dwell=1.0)
    e = energy(log, v_max=2.0)
    assert e == pytest.approx(10 * 0.25 * 0.5 + 0.25 * 4.0 * 10 * (1.0 - 0.5))
    fast = line_log(10, v=1.0)
    slow = line_log(10, v=0.5)
    assert energy(fast, 2.0) >= 2 * energy(slow, 2.0) - 1e-12


# -- closed loop -------------------------------------------------------------------


def test_no_obstacles_uniform_is_rficp_output():
    sc = generate_scenario(flat_spec(level=0.5))
    plan = build_plan(sc)
    res = run_shift(sc, plan=plan)
    assert np.array_equal(res.path.positions, plan.timed.positions)
    assert np.array_equal(res.path.speed, plan.timed.speed)
    assert np.array_equal(res.log.positions, plan.timed.positions)
    assert res.latencies_ms == []


@pytest.mark.parametrize("level", [0.0, 0.5])
def test_uniform_baseline_equals_shift(level):
    sc = generate_scenario(flat_spec(level=level))
    plan = build_plan(sc)
    b = run_baseline(sc, plan=plan)
    s = run_shift(sc, plan=plan, baseline=b)
    db, ds = b.report.to_json(), s.report.to_json()
    for k, v in db.items():
        if isinstance(v, float):
            assert ds[k] == pytest.approx(v, rel=1e-9, abs=1e-9), k


def test_patch_shift_beats_baseline_uniformity():
    sc = generate_scenario(patch_scenario_spec(0))
    plan = build_plan(sc)
    b = run_baseline(sc, plan=plan)
    s = run_shift(sc, plan=plan, baseline=b)
    assert s.report.uniformity > b.report.uniformity
    assert s.report.demand_completeness > b.report.demand_completeness
    assert b.report.energy_efficiency == 1.0


def test_mid_run_obstacle():
    base = generate_scenario(flat_spec(level=0.3))
    T = time_budget(build_plan(base).timed)
    cyl = Cylinder(2.5, 2.6, 0.2, 1.0)
    sc = generate_scenario(flat_spec(level=0.3, events=(ObstacleEvent(0.3 * T, "add", cyl),)))
    plan = build_plan(sc)
    res = run_shift(sc, plan=plan)
    field = DistanceField(cylinder_points(cyl))
    i0 = int(np.searchsorted(res.log.time, 0.3 * T))
    d_safe = SimConfig().swopt.cost.d_safe
    assert field.distance(res.log.positions[i0:]).min() >= d_safe - 1e-3
    moved = np.flatnonzero(np.any(res.path.positions != plan.timed.positions, axis=1))
    assert len(moved) and moved.min() >= i0
    assert set(moved) <= set(np.flatnonzero(res.path.window_id >= 0))
    assert res.infeasible == 0 and len(res.latencies_ms) >= 1


def test_moving_obstacle_run():
    base = generate_scenario(flat_spec(level=0.2))
    T = time_budget(build_plan(base).timed)
    ev = tuple(moving_obstacle(Cylinder(1.0, 2.5, 0.15), (0.5, 0.0), 0.2 * T, 0.2 * T + 1.0, tick=0.25))
    sc = generate_scenario(flat_spec(level=0.2, events=ev))
    res = run_shift(sc)
    assert res.report.min_clearance >= SimConfig().swopt.safety.hard_clearance


def test_log_and_replay(tmp_path):
    sc = generate_scenario(patch_scenario_spec(1, size=(6.0, 6.0), n_patches=3, radius=(0.8, 1.2)))
    plan = build_plan(sc)
    b = run_baseline(sc, plan=plan)
    s = run_shift(sc, plan=plan, baseline=b)
    s.save_log(tmp_path / "s.jsonl")
    b.save_log(tmp_path / "b.jsonl")
    recs = load_records(tmp_path / "s.jsonl")
    assert len(recs) == len(plan.timed)
    assert {"i", "t", "x", "y", "z", "v", "t_dwell", "t_exp", "s", "revisit", "window_id"} == set(recs[0])
    rep = replay_metrics(recs, sc, baseline_records=load_records(tmp_path / "b.jsonl"))
    for k in ("completeness", "demand_completeness", "overlap", "uniformity", "energy", "energy_efficiency",
              "total_time", "path_length"):
        assert getattr(rep, k) == pytest.approx(getattr(s.report, k), rel=1e-9, abs=1e-9), k
    with pytest.raises(ValueError):
        replay_metrics([], sc)


def test_run_deterministic(tmp_path):
    sc = generate_scenario(patch_scenario_spec(2, size=(6.0, 6.0), n_patches=3, radius=(0.8, 1.2)))
    a = run_shift(sc)
    b = run_shift(generate_scenario(patch_scenario_spec(2, size=(6.0, 6.0), n_patches=3, radius=(0.8, 1.2))))
    a.save_log(tmp_path / "a.jsonl")
    b.save_log(tmp_path / "b.jsonl")
    assert (tmp_path / "a.jsonl").read_bytes() == (tmp_path / "b.jsonl").read_bytes()
    assert json.dumps(a.report.to_json()["uniformity"]) == json.dumps(b.report.to_json()["uniformity"])
