"""Run metrics: completeness, overlap, energy efficiency, uniformity, latency."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from ..rficp import CoverageParams, SemanticField
from .coverage import CoverageLedger


@dataclass(frozen=True)
class MetricThresholds:
    c_done: float = 0.6  # fraction of a cell's demand that counts as cleaned
    p_idle_frac: float = 0.25  # idle power as a fraction of cruise power at v_max


@dataclass
class ExecutionLog:
    """Per executed waypoint: position, speed, attributed length, exposure split, revisit flag."""

    positions: np.ndarray
    speed: np.ndarray
    step: np.ndarray
    move_time: np.ndarray
    idle_time: np.ndarray
    revisit: np.ndarray
    time: np.ndarray
    dwell: np.ndarray
    window_id: np.ndarray

    @property
    def exposure(self) -> np.ndarray:
        return self.move_time + self.idle_time

    def records(self) -> list[dict]:
        out = []
        for k in range(len(self.positions)):
            p = self.positions[k]
            wid = int(self.window_id[k])
            out.append({"i": k, "t": round(float(self.time[k]), 12), "x": float(p[0]), "y": float(p[1]),
                        "z": float(p[2]), "v": float(self.speed[k]), "t_dwell": float(self.dwell[k]),
                        "t_exp": float(self.move_time[k] + self.idle_time[k]), "s": float(self.step[k]),
                        "revisit": bool(self.revisit[k]), "window_id": wid if wid >= 0 else None})
        return out


@dataclass
class MetricsReport:
    completeness: float
    demand_completeness: float
    overlap: float
    energy_efficiency: float | None
    energy: float
    uniformity: float
    total_time: float
    path_length: float
    cleaned_area: float
    reachable_cells: int
    demand_cells: int
    min_clearance: float = math.inf
    infeasible_passes: int = 0
    latency_ms: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        d = asdict(self)
        if not math.isfinite(d["min_clearance"]):
            d["min_clearance"] = None
        return d


def demand(semantic: SemanticField, params: CoverageParams) -> np.ndarray:
    """Per-cell coverage still owed, ``max(0, k A - C_target)``."""
    return np.maximum(params.k * semantic.values - params.C_target, 0.0)


def uniformity(values) -> float:
    """``(1 - CoV) * 100`` with the population standard deviation, floored at 0."""
    v = np.asarray(values, float).ravel()
    if len(v) == 0:
        return 0.0
    mu = v.mean()
    if mu <= 0:
        return 0.0
    return max(0.0, (1.0 - v.std() / mu) * 100.0)


def latency_stats(latencies_ms) -> dict:
    lat = np.asarray(latencies_ms, float)
    if len(lat) == 0:
        return {"count": 0, "median": None, "p95": None, "max": None, "mean": None}
    return {"count": int(len(lat)), "median": float(np.median(lat)), "p95": float(np.percentile(lat, 95)),
            "max": float(lat.max()), "mean": float(lat.mean())}


def energy(log: ExecutionLog, v_max: float, thresholds: MetricThresholds = MetricThresholds()) -> float:
    """``sum(v^2 dt) + P_idle * idle`` with ``P_idle = p_idle_frac * v_max^2``."""
    p_idle = thresholds.p_idle_frac * v_max ** 2
    return float(np.sum(log.speed ** 2 * log.move_time) + p_idle * np.sum(log.idle_time))


def cleaned_mask(ledger: CoverageLedger, need: np.ndarray, c_done: float) -> np.ndarray:
    return ledger.c >= c_done * need - 1e-12


def compute_metrics(ledger: CoverageLedger, log: ExecutionLog, semantic: SemanticField,
                    params: CoverageParams, reachable: np.ndarray | None = None,
                    thresholds: MetricThresholds = MetricThresholds(),
                    baseline_efficiency: float | None = None) -> MetricsReport:
    """Score a finished run.

    A cell is cleaned once it holds ``c_done`` of its demand; uniformity is
    taken over the normalized intensity ``c / demand`` on demand cells.
    ``baseline_efficiency`` (cleaned area per energy of the constant-speed
    run) normalizes the energy efficiency; without it the raw ratio is given.
    """
    need = demand(semantic, params)
    free = np.ones(ledger.shape, bool) if reachable is None else np.asarray(reachable, bool)
    cleaned = cleaned_mask(ledger, need, thresholds.c_done) & free
    dem = (need > 0) & free
    n_free = int(free.sum())
    completeness = 100.0 * cleaned.sum() / n_free if n_free else 0.0
    demand_completeness = 100.0 * (cleaned & dem).sum() / dem.sum() if dem.any() else 100.0
    rho = np.minimum(ledger.c[dem] / need[dem], 1.0)
    step = np.asarray(log.step, float)
    total = float(step.sum())
    overlap = 100.0 * float(step[log.revisit].sum()) / total if total > 0 else 0.0
    e = energy(log, params.v_max, thresholds)
    area = float(cleaned.sum()) * ledger.cell_area
    eff = area / e if e > 0 and area > 0 else 0.0
    if baseline_efficiency is not None:
        eff = eff / baseline_efficiency if baseline_efficiency > 0 else 0.0
    seg = np.linalg.norm(np.diff(log.positions, axis=0), axis=1) if len(log.positions) > 1 else np.zeros(0)
    return MetricsReport(
        completeness=float(np.clip(completeness, 0, 100)),
        demand_completeness=float(np.clip(demand_completeness, 0, 100)),
        overlap=float(np.clip(overlap, 0, 100)),
        energy_efficiency=float(eff),
        energy=e,
        uniformity=uniformity(rho),
        total_time=float(np.sum(log.move_time + log.idle_time)),
        path_length=float(seg.sum()),
        cleaned_area=area,
        reachable_cells=n_free,
        demand_cells=int(dem.sum()),
    )
