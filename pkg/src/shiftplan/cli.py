"""Command line entry point.

Exit codes: 0 success, 1 a replanning pass was infeasible, 2 configuration error.
Outputs go to the declared files; progress is logged to standard error.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time

import numpy as np

from .config import load_config
from .sim.bench import run_bench, write_bench_csv
from .sim.runner import (RunResult, build_plan, load_records, replay_metrics, run_baseline, run_shift)
from .sim.scenario import ConfigError, generate_scenario
from .surface import extract_elevation

log = logging.getLogger("shiftplan")

EXIT_OK, EXIT_INFEASIBLE, EXIT_CONFIG = 0, 1, 2


def _common(p: argparse.ArgumentParser, scenario_required: bool = True) -> None:
    p.add_argument("--scenario", required=scenario_required, help="INI configuration file")
    p.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    p.add_argument("--set", dest="overrides", action="append", default=[], metavar="SECTION.KEY=VALUE",
                   help="override one configuration value (repeatable)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="shiftplan", description="Semantic coverage planning with local replanning.")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit-surface", help="fit and filter the terrain surface")
    _common(p)
    p.add_argument("--out", required=True, help="surface summary JSON")
    p.add_argument("--elevation", help="optional elevation map CSV (x,y,z)")
    p.add_argument("--resolution", type=float, default=0.25, help="elevation map spacing (m)")

    p = sub.add_parser("plan", help="coverage path with speed and dwell allocation")
    _common(p)
    p.add_argument("--out", required=True, help="trajectory JSON lines")

    for name, text in (("simulate", "full planner loop"), ("baseline", "constant-speed baseline")):
        p = sub.add_parser(name, help=text)
        _common(p)
        p.add_argument("--out", required=True,
                       help="trajectory JSON lines; metrics.json, coverage.csv and windows.json go alongside")

    p = sub.add_parser("metrics", help="recompute metrics from a trajectory log")
    _common(p)
    p.add_argument("--log", required=True, help="trajectory JSON lines from simulate or baseline")
    p.add_argument("--baseline-log", help="baseline log used to normalize energy efficiency")
    p.add_argument("--out", required=True, help="metrics JSON")

    p = sub.add_parser("bench-local", help="local replanning benchmark in random cylinder fields")
    _common(p, scenario_required=False)
    p.add_argument("--density", type=float, default=0.3, help="obstacles per square meter")
    p.add_argument("--trials", type=int, default=20)
    p.add_argument("--out", required=True, help="CSV with trial,density,t_s,L_m,E_norm,tp_ms")
    return parser


def _sidecar(out: str, name: str) -> str:
    return os.path.join(os.path.dirname(os.path.abspath(out)), name)


def _write_json(path: str, obj) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _fit_surface(args, cfg) -> int:
    scenario = generate_scenario(cfg.scenario)
    plan = build_plan(scenario, cfg.sim)
    f = plan.filtered
    s = f.surface
    _write_json(args.out, {
        "bounds": list(s.bounds), "control_counts": list(s.shape), "degree": [s.degree_u, s.degree_v],
        "rms_residual": s.rms_residual, "outliers": len(f.outliers), "smoothing_iterations": f.iterations,
        "converged": f.converged, "K_threshold": f.thresholds.K_th, "H_threshold": f.thresholds.H_th,
    })
    if args.elevation:
        em = extract_elevation(s, args.resolution)
        X, Y = np.meshgrid(em.xs(), em.ys(), indexing="ij")
        with open(args.elevation, "w") as fh:
            fh.write("x,y,z\n")
            for x, y, z, m in zip(X.ravel(), Y.ravel(), em.z.ravel(), em.mask.ravel()):
                if m:
                    fh.write(f"{x:.6g},{y:.6g},{z:.10g}\n")
    log.info("surface: rms %.3g, %d outlier cells, %d smoothing iterations", s.rms_residual,
             len(f.outliers), f.iterations)
    return EXIT_OK


def _plan(args, cfg) -> int:
    scenario = generate_scenario(cfg.scenario)
    plan = build_plan(scenario, cfg.sim)
    plan.timed.save_jsonl(args.out)
    log.info("plan: %d waypoints, %d saturated", len(plan.timed), int(plan.timed.saturated.sum()))
    return EXIT_OK


def _write_run(args, res: RunResult) -> int:
    res.save_log(args.out)
    _write_json(_sidecar(args.out, "metrics.json"), res.report.to_json())
    _write_json(_sidecar(args.out, "windows.json"), res.window_reports)
    res.ledger.to_csv(_sidecar(args.out, "coverage.csv"))
    r = res.report
    log.info("%s: completeness %.1f%%, uniformity %.1f%%, overlap %.1f%%, %d infeasible passes",
             res.mode, r.completeness, r.uniformity, r.overlap, res.infeasible)
    return EXIT_INFEASIBLE if res.infeasible else EXIT_OK


def _simulate(args, cfg) -> int:
    scenario = generate_scenario(cfg.scenario)
    return _write_run(args, run_shift(scenario, cfg.sim))


def _baseline(args, cfg) -> int:
    scenario = generate_scenario(cfg.scenario)
    return _write_run(args, run_baseline(scenario, cfg.sim))


def _metrics(args, cfg) -> int:
    scenario = generate_scenario(cfg.scenario)
    for path in (args.log, args.baseline_log):
        if path is not None and not os.path.isfile(path):
            raise ConfigError(f"log file {path} not found")
    base = load_records(args.baseline_log) if args.baseline_log else None
    report = replay_metrics(load_records(args.log), scenario, cfg.sim, base)
    _write_json(args.out, report.to_json())
    return EXIT_OK


def _bench(args, cfg) -> int:
    if args.trials < 1 or not args.density > 0:
        raise ConfigError("need trials >= 1 and density > 0")
    seed = args.seed if args.seed is not None else 0
    t0 = time.perf_counter()
    results = run_bench(args.density, args.trials, seed, cfg.bench)
    write_bench_csv(results, args.out)
    lat = np.concatenate([r.latencies_ms for r in results]) if results else np.zeros(0)
    log.info("bench: %d trials in %.1f s, median pass %.2f ms", len(results), time.perf_counter() - t0,
             float(np.median(lat)) if len(lat) else float("nan"))
    return EXIT_INFEASIBLE if any(r.infeasible for r in results) else EXIT_OK


_COMMANDS = {"fit-surface": _fit_surface, "plan": _plan, "simulate": _simulate, "baseline": _baseline,
             "metrics": _metrics, "bench-local": _bench}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO, stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.scenario, args.overrides, args.seed)
        for path in (args.out, getattr(args, "elevation", None)):
            if path:
                os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
        return _COMMANDS[args.command](args, cfg)
    except ConfigError as exc:
        log.error("configuration error: %s", exc)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
