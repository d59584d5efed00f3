"""INI configuration: scenario description plus planner parameter overrides.

Sections map onto the parameter dataclasses. Scenario geometry comes from
``[scenario] preset = patches`` (a seeded patch layout) or from explicit
``[terrain]``, ``[semantic]``, ``[patch.N]``, ``[obstacle.N]``, ``[event.N]``,
``[moving.N]`` and ``[robot]`` sections. Planner settings live in
``[planner]``, ``[coverage]``, ``[safety]``, ``[cost]``, ``[astar]``,
``[swopt]``, ``[metrics]`` and ``[bench]``.
"""

from __future__ import annotations

import configparser
import dataclasses
import os
from dataclasses import dataclass, replace

from .sim.bench import BenchConfig
from .sim.runner import SimConfig
from .sim.scenario import (ConfigError, Cylinder, ObstacleEvent, ObstacleSpec, Patch, RobotSpec, ScenarioSpec,
                           SemanticSpec, TerrainSpec, moving_obstacle, patch_scenario_spec)

_PRESETS = ("patches", "custom")


@dataclass(frozen=True)
class RunConfig:
    scenario: ScenarioSpec
    sim: SimConfig
    bench: BenchConfig


def _convert(raw: str, default, where: str):
    try:
        if isinstance(default, bool):
            v = raw.strip().lower()
            if v in ("1", "true", "yes", "on"):
                return True
            if v in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
        if isinstance(default, tuple):
            parts = [p.strip() for p in raw.split(",") if p.strip()]
            kind = int if default and all(isinstance(d, int) for d in default) else float
            return tuple(kind(p) for p in parts)
        return raw.strip()
    except ValueError as exc:
        raise ConfigError(f"{where}: cannot parse {raw!r}") from exc


def _apply(obj, section: configparser.SectionProxy, skip=()):
    """Replace dataclass fields of ``obj`` from ``section``; unknown keys are errors."""
    names = {f.name: f for f in dataclasses.fields(obj)}
    updates = {}
    for key, raw in section.items():
        if key in skip:
            continue
        if key not in names or dataclasses.is_dataclass(getattr(obj, key)):
            raise ConfigError(f"[{section.name}] unknown key {key!r}")
        updates[key] = _convert(raw, getattr(obj, key), f"[{section.name}] {key}")
    try:
        return replace(obj, **updates)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"[{section.name}] {exc}") from exc


def _build(cls, section: configparser.SectionProxy, defaults: dict):
    names = {f.name for f in dataclasses.fields(cls)}
    vals = dict(defaults)
    for key, raw in section.items():
        if key not in names:
            raise ConfigError(f"[{section.name}] unknown key {key!r}")
        ref = defaults.get(key, 0.0)
        vals[key] = _convert(raw, ref, f"[{section.name}] {key}")
    try:
        return cls(**vals)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"[{section.name}] {exc}") from exc


def _numbered(cp: configparser.ConfigParser, prefix: str) -> list:
    out = []
    for name in cp.sections():
        if name.startswith(prefix + "."):
            try:
                out.append((int(name.split(".", 1)[1]), cp[name]))
            except ValueError as exc:
                raise ConfigError(f"section [{name}] needs an integer suffix") from exc
    return [s for _, s in sorted(out, key=lambda t: t[0])]


def _cylinder(sec, keys=("x", "y", "radius", "height")):
    vals = {}
    for k in keys:
        if k in sec:
            vals[k] = _convert(sec[k], 0.0, f"[{sec.name}] {k}")
    if not all(k in vals for k in ("x", "y", "radius")):
        raise ConfigError(f"[{sec.name}] needs x, y and radius")
    try:
        return Cylinder(**vals)
    except ValueError as exc:
        raise ConfigError(f"[{sec.name}] {exc}") from exc


def _scenario(cp: configparser.ConfigParser, seed: int | None) -> ScenarioSpec:
    sc = cp["scenario"] if cp.has_section("scenario") else {}
    preset = sc.get("preset", "custom").strip()
    if preset not in _PRESETS:
        raise ConfigError(f"unknown preset {preset!r}; expected one of {_PRESETS}")
    base_seed = int(_convert(sc.get("seed", "0"), 0, "[scenario] seed"))
    seed = base_seed if seed is None else seed
    if preset == "patches":
        opts = {}
        for key, default in (("n_patches", 5), ("levels", (0.2, 1.0)), ("radius", (1.0, 1.8)),
                             ("size", (10.0, 10.0)), ("background", 0.05), ("n_static", 2),
                             ("dynamic", True), ("terrain", "ridged")):
            if key in sc:
                opts[key] = _convert(sc[key], default, f"[scenario] {key}")
        extra = set(sc) - set(opts) - {"preset", "seed"}
        if extra:
            raise ConfigError(f"[scenario] unknown keys {sorted(extra)}")
        spec = patch_scenario_spec(seed, **opts)
    else:
        extra = set(sc) - {"preset", "seed"}
        if extra:
            raise ConfigError(f"[scenario] unknown keys {sorted(extra)}")
        terrain = _apply(TerrainSpec(), cp["terrain"]) if cp.has_section("terrain") else TerrainSpec()
        semantic = _apply(SemanticSpec(), cp["semantic"]) if cp.has_section("semantic") else SemanticSpec()
        patches = tuple(_build(Patch, s, {}) for s in _numbered(cp, "patch"))
        if patches:
            semantic = replace(semantic, patches=semantic.patches + patches)
        static = tuple(_cylinder(s) for s in _numbered(cp, "obstacle"))
        events = []
        for s in _numbered(cp, "event"):
            action = s.get("action", "add").strip()
            t = _convert(s.get("time", "0"), 0.0, f"[{s.name}] time")
            try:
                events.append(ObstacleEvent(t, action, _cylinder(s)))
            except ValueError as exc:
                raise ConfigError(f"[{s.name}] {exc}") from exc
        for s in _numbered(cp, "moving"):
            cyl = _cylinder(s)
            v = (_convert(s.get("vx", "0"), 0.0, f"[{s.name}] vx"), _convert(s.get("vy", "0"), 0.0, f"[{s.name}] vy"))
            t0 = _convert(s.get("t0", "0"), 0.0, f"[{s.name}] t0")
            t1 = _convert(s.get("t1", "1"), 0.0, f"[{s.name}] t1")
            tick = _convert(s.get("tick", "0.1"), 0.0, f"[{s.name}] tick")
            try:
                events.extend(moving_obstacle(cyl, v, t0, t1, tick))
            except ValueError as exc:
                raise ConfigError(f"[{s.name}] {exc}") from exc
        try:
            obstacles = ObstacleSpec(static, tuple(sorted(events, key=lambda e: e.time)))
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        if cp.has_section("obstacles"):
            obstacles = _apply(obstacles, cp["obstacles"])
        spec = ScenarioSpec(terrain, semantic, obstacles, RobotSpec(), seed)
    if cp.has_section("robot"):
        spec = replace(spec, robot=_apply(spec.robot, cp["robot"]))
    return replace(spec, seed=seed)


def _sim(cp: configparser.ConfigParser) -> SimConfig:
    cfg = SimConfig()
    if cp.has_section("planner"):
        cfg = _apply(cfg, cp["planner"])
    sw = cfg.swopt
    for name in ("safety", "cost", "astar"):
        if cp.has_section(name):
            sw = replace(sw, **{name: _apply(getattr(sw, name), cp[name])})
    if cp.has_section("swopt"):
        sw = _apply(sw, cp["swopt"])
    cov = _apply(cfg.coverage, cp["coverage"]) if cp.has_section("coverage") else cfg.coverage
    met = _apply(cfg.metrics, cp["metrics"]) if cp.has_section("metrics") else cfg.metrics
    return replace(cfg, swopt=sw, coverage=cov, metrics=met)


_KNOWN = {"scenario", "terrain", "semantic", "obstacles", "robot", "planner", "coverage", "safety", "cost",
          "astar", "swopt", "metrics", "bench"}


def parse_config(cp: configparser.ConfigParser, seed: int | None = None) -> RunConfig:
    for name in cp.sections():
        head = name.split(".", 1)[0]
        if name not in _KNOWN and head not in ("patch", "obstacle", "event", "moving"):
            raise ConfigError(f"unknown section [{name}]")
    sim = _sim(cp)
    bench = BenchConfig(swopt=sim.swopt)
    if cp.has_section("bench"):
        bench = _apply(bench, cp["bench"])
    return RunConfig(_scenario(cp, seed), sim, bench)


def apply_overrides(cp: configparser.ConfigParser, overrides) -> None:
    """``section.key=value`` strings; the section is created when missing."""
    for item in overrides or ():
        if "=" not in item or "." not in item.split("=", 1)[0]:
            raise ConfigError(f"override {item!r} is not section.key=value")
        lhs, value = item.split("=", 1)
        section, key = lhs.rsplit(".", 1)
        if not cp.has_section(section):
            cp.add_section(section)
        cp[section][key.strip()] = value.strip()


def load_config(path=None, overrides=(), seed: int | None = None) -> RunConfig:
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str  # field names such as R and C_target are case sensitive
    if path is not None:
        if not os.path.isfile(path):
            raise ConfigError(f"config file {path} not found")
        try:
            cp.read(path)
        except configparser.Error as exc:
            raise ConfigError(str(exc)) from exc
    apply_overrides(cp, overrides)
    return parse_config(cp, seed)
