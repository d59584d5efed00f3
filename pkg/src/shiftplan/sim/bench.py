"""Local replanning benchmark in random cylinder fields.

A straight flight line crosses a field of cylinders. Obstacles are revealed
one at a time as the vehicle comes within sensing range, each reveal being
one obstacle event for the local planner.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from ..ikd import IncrementalKdTree
from ..rficp import ramp_limit
from ..swopt import LocalPlanner, SwoptParams, heading_changes
from .scenario import cylinder_points, random_cylinders


@dataclass(frozen=True)
class BenchConfig:
    length: float = 35.0  # close to the reference path length of the local-planning comparison
    width: float = 6.0
    spacing: float = 0.2
    altitude: float = 1.0
    v_cruise: float = 1.65
    a_max: float = 1.0
    a_lat: float = 1.0
    sensing_range: float = 3.0
    clear_radius: float = 1.0
    radius: tuple = (0.15, 0.3)
    height: tuple = (0.5, 2.0)
    point_spacing: float = 0.08
    layer_spacing: float = 0.25
    swopt: SwoptParams = SwoptParams()


@dataclass
class TrialResult:
    trial: int
    density: float
    t_s: float
    L_m: float
    E_norm: float
    tp_ms: float
    latencies_ms: list = field(default_factory=list)
    modified_fraction: list = field(default_factory=list)  # per event
    window_sizes: list = field(default_factory=list)  # control points per optimized window
    infeasible: int = 0
    min_clearance: float = math.inf
    n_obstacles: int = 0

    def row(self) -> dict:
        return {"trial": self.trial, "density": self.density, "t_s": round(self.t_s, 6),
                "L_m": round(self.L_m, 6), "E_norm": round(self.E_norm, 6), "tp_ms": round(self.tp_ms, 6)}


def speed_profile(points: np.ndarray, v_cruise: float, a_lat: float, a_max: float) -> np.ndarray:
    """Cruise speed capped by lateral acceleration at turns, then ramp-limited."""
    seg = np.linalg.norm(np.diff(points, axis=0), axis=1)
    turn = heading_changes(points)
    local = np.full(len(points), np.inf)
    local[1:-1] = 0.5 * (seg[:-1] + seg[1:])
    with np.errstate(divide="ignore"):
        kappa = np.where(local > 0, turn / local, 0.0)
        v = np.where(kappa > 1e-12, np.sqrt(a_lat / np.maximum(kappa, 1e-12)), v_cruise)
    v = np.minimum(v, v_cruise)
    return ramp_limit(v, seg, a_max)


def flight_metrics(points: np.ndarray, cfg: BenchConfig) -> tuple[float, float, float]:
    """``(t, L, E)`` with ``E = sum(v^2 dt)``; segment speed is the mean of its end speeds."""
    v = speed_profile(points, cfg.v_cruise, cfg.a_lat, cfg.a_max)
    seg = np.linalg.norm(np.diff(points, axis=0), axis=1)
    vs = np.maximum(0.5 * (v[:-1] + v[1:]), 1e-6)
    dt = seg / vs
    return float(dt.sum()), float(seg.sum()), float(np.sum(vs * vs * dt))


def run_trial(density: float, trial: int, seed: int = 0, cfg: BenchConfig = BenchConfig()) -> TrialResult:
    rng = np.random.default_rng([seed, trial, int(round(density * 1000))])
    y0 = cfg.width / 2
    xs = np.arange(0.0, cfg.length + 1e-9, cfg.spacing)
    path = np.column_stack([xs, np.full_like(xs, y0), np.full_like(xs, cfg.altitude)])
    keep = ((0.0, y0, cfg.clear_radius), (cfg.length, y0, cfg.clear_radius))
    cyls = random_cylinders(rng, (0.0, 0.0), (cfg.length, cfg.width), density, cfg.radius, cfg.height, keep)
    cyls.sort(key=lambda c: (c.x, c.y))
    planner = LocalPlanner(path, IncrementalKdTree(), cfg.swopt)
    n = len(path)
    res = TrialResult(trial, density, 0.0, 0.0, 0.0, 0.0, n_obstacles=len(cyls))
    for c in cyls:
        reveal_x = c.x - c.radius - cfg.sensing_range
        start = int(np.searchsorted(planner.points[:, 0], reveal_x, side="right")) - 1
        start = min(max(start, 0), n - 1)
        rep = planner.update(add=cylinder_points(c, cfg.point_spacing, 0.0, cfg.layer_spacing), start=start)
        res.latencies_ms.extend(rep.latencies_ms)
        res.modified_fraction.append(len(rep.modified) / n)
        res.infeasible += len(rep.infeasible)
        for p in rep.passes:
            res.window_sizes.extend(min(w.hi + 2, n - 1) - max(w.lo - 2, 0) + 1 for w in p.windows)
    final = planner.points
    res.min_clearance = float(planner.field.distance(final).min()) if len(cyls) else math.inf
    t, L, E = flight_metrics(final, cfg)
    _, _, E_ref = flight_metrics(path, cfg)
    res.t_s, res.L_m, res.E_norm = t, L, E / E_ref
    res.tp_ms = float(np.median(res.latencies_ms)) if res.latencies_ms else 0.0
    return res


def run_bench(density: float, trials: int, seed: int = 0, cfg: BenchConfig = BenchConfig()) -> list[TrialResult]:
    return [run_trial(density, k, seed, cfg) for k in range(trials)]


BENCH_HEADER = ["trial", "density", "t_s", "L_m", "E_norm", "tp_ms"]


def write_bench_csv(results: list[TrialResult], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=BENCH_HEADER)
        w.writeheader()
        for r in results:
            w.writerow(r.row())
