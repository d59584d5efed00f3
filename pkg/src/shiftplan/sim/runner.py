"""End-to-end planner loop and the constant-speed baseline."""

from __future__ import annotations

import json
import math
import warnings
from collections import deque
from dataclasses import dataclass, field, replace

import numpy as np

from ..ikd import DistanceField, IncrementalKdTree
from ..landmark import CoveragePath, apply_offset, boustrophedon_order, grid_landmarks
from ..rficp import CoverageParams, TimedPath, _dwell, allocate_velocities, ramp_limit, speed
from ..surface import FilterResult, ParametricSurface, filter_surface, fit_surface
from ..swopt import LocalPlanner, SwoptParams
from .coverage import CoverageLedger, deposit_coverage
from .metrics import ExecutionLog, MetricThresholds, MetricsReport, compute_metrics, demand, latency_stats
from .scenario import Scenario


@dataclass(frozen=True)
class SimConfig:
    control_counts: tuple = (12, 12)
    filter_method: str = "smooth"
    alpha_k: float = 2.0
    beta_h: float = 2.0
    spacing: float = 0.25
    transpose: bool = False
    coverage: CoverageParams = CoverageParams(sigma=0.4, R=1.2, delta_s=0.25)
    swopt: SwoptParams = SwoptParams()
    metrics: MetricThresholds = MetricThresholds()


@dataclass
class Plan:
    surface: ParametricSurface
    filtered: FilterResult
    path: CoveragePath
    timed: TimedPath
    coverage: CoverageParams

    def height_fn(self):
        u0, u1, v0, v1 = self.surface.bounds
        surf = self.surface

        def h(x, y):
            return surf.height(np.clip(x, u0, u1), np.clip(y, v0, v1))
        return h


@dataclass
class RunResult:
    mode: str
    log: ExecutionLog
    ledger: CoverageLedger
    report: MetricsReport
    path: TimedPath
    latencies_ms: list
    window_reports: list = field(default_factory=list)
    infeasible: int = 0

    def save_log(self, path) -> None:
        with open(path, "w") as fh:
            for rec in self.log.records():
                fh.write(json.dumps(rec) + "\n")


def coverage_params(scenario: Scenario, config: SimConfig) -> CoverageParams:
    r = scenario.spec.robot
    return replace(config.coverage, v_min=r.v_min, v_max=r.v_max, a_max=r.a_max, delta_s=config.spacing)


def build_plan(scenario: Scenario, config: SimConfig = SimConfig()) -> Plan:
    """Surface extraction, landmark lattice, boustrophedon order and speed allocation."""
    cloud = scenario.cloud
    surf = fit_surface(cloud, 3, config.control_counts)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        filt = filter_surface(cloud, surf, config.alpha_k, config.beta_h, config.filter_method)
    grid = apply_offset(grid_landmarks(filt.surface, config.spacing), scenario.spec.robot.z_offset)
    path = boustrophedon_order(grid, config.transpose)
    cov = coverage_params(scenario, config)
    timed = allocate_velocities(path, scenario.semantic, cov)
    return Plan(filt.surface, filt, path, timed, cov)


def attributed_lengths(points: np.ndarray) -> np.ndarray:
    """Half of each adjacent segment; end points take their single segment whole."""
    seg = np.linalg.norm(np.diff(points, axis=0), axis=1)
    if len(seg) == 0:
        return np.zeros(len(points))
    s = np.empty(len(points))
    s[0], s[-1] = seg[0], seg[-1]
    s[1:-1] = 0.5 * (seg[:-1] + seg[1:])
    return s


def _attributed(points: np.ndarray, i: int) -> float:
    n = len(points)
    if n < 2:
        return 0.0
    if i == 0:
        return float(np.linalg.norm(points[1] - points[0]))
    if i == n - 1:
        return float(np.linalg.norm(points[-1] - points[-2]))
    return 0.5 * float(np.linalg.norm(points[i] - points[i - 1]) + np.linalg.norm(points[i + 1] - points[i]))


def time_budget(timed: TimedPath) -> float:
    """Total exposure of a plan: each waypoint gets ``max(dwell, s / v)``."""
    s = attributed_lengths(timed.positions)
    return float(np.sum(np.maximum(timed.dwell, s / timed.speed)))


def baseline_speed(timed: TimedPath, cov: CoverageParams) -> float:
    """Constant speed that spends the same total time as the modulated plan."""
    s = attributed_lengths(timed.positions)
    T = time_budget(timed)
    return float(np.clip(s.sum() / T, cov.v_min, cov.v_max)) if T > 0 else cov.v_max


def reachable_cells(scenario: Scenario, ledger: CoverageLedger, clearance: float,
                    extra_points: np.ndarray | None = None) -> np.ndarray:
    """Cells whose centre keeps ``clearance`` from every obstacle point."""
    pts = scenario.static_points
    if extra_points is not None and len(extra_points):
        pts = np.concatenate([pts, extra_points])
    if len(pts) == 0:
        return np.ones(ledger.shape, bool)
    C = ledger.centers().reshape(-1, 2)
    z = scenario.height(C[:, 0], C[:, 1]) + scenario.spec.robot.z_offset
    D = DistanceField(pts).distance(np.column_stack([C, z]))
    return (D >= clearance).reshape(ledger.shape)


class _Executor:
    def __init__(self, scenario: Scenario, config: SimConfig, plan: Plan, mode: str, v_const: float | None):
        self.scenario = scenario
        self.config = config
        self.plan = plan
        self.mode = mode
        self.cov = plan.coverage
        path = plan.timed.copy()
        if mode == "baseline":
            path.speed[:] = v_const
            path.dwell[:] = 0.0
        params = replace(config.swopt, z_offset=scenario.spec.robot.z_offset)
        self.tree = IncrementalKdTree()
        self.planner = LocalPlanner(path, self.tree, params, limits=self.cov, height_fn=plan.height_fn())
        self.v_const = v_const
        self.latencies: list = []
        self.window_reports: list = []
        self.infeasible = 0

    def _apply(self, rep, start: int) -> None:
        self.latencies.extend(rep.latencies_ms)
        self.window_reports.extend(r.to_json() for r in rep.reports)
        self.infeasible += len(rep.infeasible)
        if not rep.modified:
            return
        path = self.planner.path
        idx = np.array(sorted(rep.modified))
        if self.mode == "baseline":
            path.speed[idx] = self.v_const
            return
        sem = self.scenario.semantic
        xs = np.clip(path.positions[idx, 0], sem.xs()[0], sem.xs()[-1])
        ys = np.clip(path.positions[idx, 1], sem.ys()[0], sem.ys()[-1])
        a = np.clip(sem.sample(xs, ys), 0.0, 1.0)
        t, sat = _dwell(a, self.cov)
        path.dwell[idx] = t
        path.saturated[idx] = sat
        path.speed[idx] = speed(a, self.cov)
        seg = np.linalg.norm(np.diff(path.positions[start:], axis=0), axis=1)
        path.speed[start:] = ramp_limit(path.speed[start:], seg, self.cov.a_max)

    def run(self) -> tuple[ExecutionLog, CoverageLedger, float]:
        planner = self.planner
        self._apply(planner.update(add=self.scenario.static_points, start=0), 0)
        ledger = CoverageLedger(self.scenario.semantic)
        need = demand(self.scenario.semantic, self.cov)
        c_done = self.config.metrics.c_done
        events = deque(self.scenario.timeline)
        n = len(planner.path)
        rec = {k: np.zeros(n) for k in ("speed", "step", "move", "idle", "time", "dwell")}
        revisit = np.zeros(n, bool)
        pos = np.zeros((n, 3))
        wid = np.full(n, -1, int)
        min_clear = math.inf
        T = 0.0
        for i in range(n):
            while events and events[0].time <= T + 1e-12:
                ev = events.popleft()
                if ev.action == "add":
                    rep = planner.update(add=ev.points, start=i)
                else:
                    rep = planner.update(remove_box=ev.box, start=i)
                self._apply(rep, i)
            path = planner.path
            p = path.positions[i]
            s = _attributed(path.positions, i)
            v = float(path.speed[i])
            move = s / v
            idle = max(0.0, float(path.dwell[i]) - move)
            cell = ledger.cell_of(p[0], p[1])
            revisit[i] = ledger.visits[cell] > 0 and bool(ledger.c[cell] >= c_done * need[cell] - 1e-12)
            deposit_coverage(ledger, p, move + idle, self.cov)
            ledger.visits[cell] += 1
            min_clear = min(min_clear, float(planner.field.distance(p)[0]))
            pos[i] = p
            rec["speed"][i], rec["step"][i], rec["move"][i], rec["idle"][i] = v, s, move, idle
            rec["time"][i], rec["dwell"][i] = T, path.dwell[i]
            wid[i] = path.window_id[i]
            T += move + idle
        log = ExecutionLog(pos, rec["speed"], rec["step"], rec["move"], rec["idle"], revisit,
                           rec["time"], rec["dwell"], wid)
        return log, ledger, min_clear


def _run(scenario: Scenario, config: SimConfig, mode: str, plan: Plan | None,
         baseline_efficiency: float | None) -> RunResult:
    plan = plan or build_plan(scenario, config)
    v_b = baseline_speed(plan.timed, plan.coverage) if mode == "baseline" else None
    ex = _Executor(scenario, config, plan, mode, v_b)
    log, ledger, min_clear = ex.run()
    reach = reachable_cells(scenario, ledger, config.swopt.cost.d_safe, ex.tree.live_points())
    report = compute_metrics(ledger, log, scenario.semantic, plan.coverage, reach, config.metrics,
                             baseline_efficiency)
    report.min_clearance = min_clear
    report.infeasible_passes = ex.infeasible
    report.latency_ms = latency_stats(ex.latencies)
    return RunResult(mode, log, ledger, report, ex.planner.path, ex.latencies, ex.window_reports, ex.infeasible)


def run_baseline(scenario: Scenario, config: SimConfig = SimConfig(), plan: Plan | None = None) -> RunResult:
    """Same pipeline at one constant speed matching the modulated plan's time budget, no dwell."""
    res = _run(scenario, config, "baseline", plan, None)
    res.report.energy_efficiency = 1.0 if res.report.energy_efficiency > 0 else 0.0
    return res


def raw_efficiency(report: MetricsReport) -> float:
    return report.cleaned_area / report.energy if report.energy > 0 else 0.0


def run_shift(scenario: Scenario, config: SimConfig = SimConfig(), plan: Plan | None = None,
              baseline: RunResult | None = None) -> RunResult:
    """Full loop; energy efficiency is normalized by the baseline run (computed if not given)."""
    plan = plan or build_plan(scenario, config)
    if baseline is None:
        baseline = run_baseline(scenario, config, plan)
    return _run(scenario, config, "shift", plan, raw_efficiency(baseline.report))


def load_records(path) -> list[dict]:
    with open(path) as fh:
        return [json.loads(line) for line in fh if line.strip()]


def replay_metrics(records: list[dict], scenario: Scenario, config: SimConfig = SimConfig(),
                   baseline_records: list[dict] | None = None) -> MetricsReport:
    """Recompute metrics from a trajectory log by replaying its coverage deposits.

    Obstacle events up to the last logged time are replayed to recover the
    reachable cells; energy efficiency is normalized when a baseline log is given.
    """
    if not records:
        raise ValueError("empty trajectory log")
    cov = coverage_params(scenario, config)
    need = demand(scenario.semantic, cov)
    c_done = config.metrics.c_done
    ledger = CoverageLedger(scenario.semantic)
    n = len(records)
    pos = np.array([[r["x"], r["y"], r["z"]] for r in records], float)
    v = np.array([r["v"] for r in records], float)
    s = np.array([r["s"] for r in records], float)
    t_exp = np.array([r["t_exp"] for r in records], float)
    move = s / v
    idle = np.maximum(t_exp - move, 0.0)
    revisit = np.zeros(n, bool)
    for i in range(n):
        cell = ledger.cell_of(pos[i, 0], pos[i, 1])
        revisit[i] = ledger.visits[cell] > 0 and bool(ledger.c[cell] >= c_done * need[cell] - 1e-12)
        deposit_coverage(ledger, pos[i], float(t_exp[i]), cov)
        ledger.visits[cell] += 1
    wid = np.array([-1 if r.get("window_id") is None else r["window_id"] for r in records], int)
    log = ExecutionLog(pos, v, s, move, idle, revisit, np.array([r["t"] for r in records], float),
                       np.array([r["t_dwell"] for r in records], float), wid)
    tree = IncrementalKdTree()
    t_end = float(records[-1]["t"])
    for ev in scenario.timeline:
        if ev.time > t_end + 1e-12:
            break
        if ev.action == "add":
            tree.insert(ev.points)
        else:
            tree.remove(*ev.box)
    reach = reachable_cells(scenario, ledger, config.swopt.cost.d_safe, tree.live_points())
    base = None
    if baseline_records is not None:
        base = raw_efficiency(replay_metrics(baseline_records, scenario, config))
    return compute_metrics(ledger, log, scenario.semantic, cov, reach, config.metrics, base)
