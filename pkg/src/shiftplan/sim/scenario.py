"""Synthetic worlds: terrain cloud, semantic grid and obstacle timeline."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..rficp import SemanticField
from ..surface import PointCloud


class ConfigError(ValueError):
    """Malformed scenario or planner configuration."""


@dataclass(frozen=True)
class TerrainSpec:
    kind: str = "flat"  # flat | paraboloid | ridged
    size: tuple = (10.0, 10.0)
    samples: tuple = (50, 50)
    amplitude: float = 0.5
    ridges: int = 3
    noise: float = 0.0
    spikes: int = 0
    spike_height: float = 0.5

    def __post_init__(self):
        if self.kind not in ("flat", "paraboloid", "ridged"):
            raise ConfigError(f"unknown terrain kind {self.kind!r}")
        if min(self.size) <= 0:
            raise ConfigError("terrain size must be positive")
        if min(self.samples) < 4:
            raise ConfigError("need at least 4 samples per axis")
        if self.noise < 0 or self.spikes < 0:
            raise ConfigError("noise and spikes must be non-negative")


@dataclass(frozen=True)
class Patch:
    x: float
    y: float
    radius: float
    level: float


@dataclass(frozen=True)
class SemanticSpec:
    kind: str = "uniform"  # uniform | gradient | patches
    resolution: float = 0.25
    level: float = 0.0  # uniform value
    low: float = 0.0  # gradient end values along x
    high: float = 1.0
    background: float = 0.0
    patches: tuple = ()

    def __post_init__(self):
        if self.kind not in ("uniform", "gradient", "patches"):
            raise ConfigError(f"unknown semantic kind {self.kind!r}")
        if not self.resolution > 0:
            raise ConfigError("semantic resolution must be positive")
        levels = [self.level, self.low, self.high, self.background] + [p.level for p in self.patches]
        if any(not 0 <= v <= 1 for v in levels):
            raise ConfigError("semantic levels must lie in [0, 1]")


@dataclass(frozen=True)
class Cylinder:
    x: float
    y: float
    radius: float
    height: float = 1.0


@dataclass(frozen=True)
class ObstacleEvent:
    time: float
    action: str  # add | remove
    cylinder: Cylinder

    def __post_init__(self):
        if self.action not in ("add", "remove"):
            raise ConfigError(f"unknown obstacle action {self.action!r}")
        if self.time < 0:
            raise ConfigError("event time must be non-negative")


@dataclass(frozen=True)
class ObstacleSpec:
    static: tuple = ()
    events: tuple = ()
    point_spacing: float = 0.08
    layer_spacing: float = 0.25


@dataclass(frozen=True)
class RobotSpec:
    radius: float = 0.15
    v_min: float = 0.05
    v_max: float = 2.0
    a_max: float = 1.0
    z_offset: float = 0.0


@dataclass(frozen=True)
class ScenarioSpec:
    terrain: TerrainSpec = TerrainSpec()
    semantic: SemanticSpec = SemanticSpec()
    obstacles: ObstacleSpec = ObstacleSpec()
    robot: RobotSpec = RobotSpec()
    seed: int = 0


@dataclass
class TimedUpdate:
    """One obstacle change, already expanded to points (add) or a box (remove)."""

    time: float
    action: str
    points: np.ndarray | None = None
    box: tuple | None = None


@dataclass
class Scenario:
    spec: ScenarioSpec
    cloud: PointCloud
    semantic: SemanticField
    static_points: np.ndarray
    timeline: list = field(default_factory=list)
    ridges: tuple = ()

    def height(self, x, y):
        """Noise-free ground truth height."""
        return terrain_height(self.spec.terrain, x, y, self.ridges)


def moving_obstacle(cyl: Cylinder, velocity, t0: float, t1: float, tick: float = 0.1) -> list[ObstacleEvent]:
    """Approximate a cylinder moving at constant ``velocity`` by remove/add pairs each tick."""
    if not tick > 0 or t1 < t0:
        raise ConfigError("need tick > 0 and t1 >= t0")
    events = [ObstacleEvent(t0, "add", cyl)]
    prev = cyl
    n = int(math.floor((t1 - t0) / tick + 1e-9))
    for k in range(1, n + 1):
        t = t0 + k * tick
        cur = Cylinder(cyl.x + velocity[0] * (t - t0), cyl.y + velocity[1] * (t - t0), cyl.radius, cyl.height)
        events.append(ObstacleEvent(t, "remove", prev))
        events.append(ObstacleEvent(t, "add", cur))
        prev = cur
    return events


def _ridge_params(spec: TerrainSpec, rng: np.random.Generator) -> tuple:
    if spec.kind != "ridged":
        return ()
    out = []
    for _ in range(spec.ridges):
        theta = rng.uniform(0, math.pi)
        wavelength = rng.uniform(0.4, 1.0) * max(spec.size)
        phase = rng.uniform(0, 2 * math.pi)
        out.append((math.cos(theta), math.sin(theta), 2 * math.pi / wavelength, phase))
    return tuple(out)


def terrain_height(spec: TerrainSpec, x, y, ridges: tuple = ()):
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    w, h = spec.size
    if spec.kind == "flat":
        return np.zeros(np.broadcast(x, y).shape)
    if spec.kind == "paraboloid":
        r2 = ((x - w / 2) / (w / 2)) ** 2 + ((y - h / 2) / (h / 2)) ** 2
        return spec.amplitude * r2
    z = np.zeros(np.broadcast(x, y).shape)
    for cx, cy, k, ph in ridges:
        z = z + np.abs(np.sin(k * (cx * x + cy * y) + ph))
    return spec.amplitude * z / max(len(ridges), 1)


def semantic_grid(spec: SemanticSpec, size) -> SemanticField:
    """Attribute grid on ``[0, w] x [0, h]``; a patch owns every cell whose centre lies in its disk."""
    w, h = size
    nx = int(round(w / spec.resolution)) + 1
    ny = int(round(h / spec.resolution)) + 1
    xs = spec.resolution * np.arange(nx)
    ys = spec.resolution * np.arange(ny)
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    if spec.kind == "uniform":
        A = np.full(X.shape, spec.level)
    elif spec.kind == "gradient":
        A = spec.low + (spec.high - spec.low) * X / w
    else:
        A = np.full(X.shape, spec.background)
        for p in spec.patches:
            inside = (X - p.x) ** 2 + (Y - p.y) ** 2 <= p.radius ** 2
            A = np.where(inside, np.maximum(A, p.level), A)
    return SemanticField((0.0, 0.0), spec.resolution, np.clip(A, 0.0, 1.0))


def cylinder_points(cyl: Cylinder, spacing: float = 0.08, base: float = 0.0,
                    layer_spacing: float | None = None) -> np.ndarray:
    """Filled disk of concentric rings, stacked in layers from ``base`` to ``base + height``."""
    layer_spacing = spacing if layer_spacing is None else layer_spacing
    if not spacing > 0 or not layer_spacing > 0 or not cyl.radius > 0:
        raise ConfigError("cylinder radius and point spacing must be positive")
    disk = [(cyl.x, cyl.y)]
    n_rings = max(1, int(math.ceil(cyl.radius / spacing)))
    for k in range(1, n_rings + 1):
        r = cyl.radius * k / n_rings
        m = max(6, int(math.ceil(2 * math.pi * r / spacing)))
        a = 2 * math.pi * np.arange(m) / m
        disk.extend(zip(cyl.x + r * np.cos(a), cyl.y + r * np.sin(a)))
    disk = np.array(disk)
    n_layers = max(1, int(math.ceil(cyl.height / layer_spacing))) + 1
    zs = base + np.linspace(0.0, cyl.height, n_layers)
    pts = np.concatenate([np.column_stack([disk, np.full(len(disk), z)]) for z in zs])
    return pts


def cylinder_box(cyl: Cylinder, base: float = 0.0, pad: float = 1e-6) -> tuple:
    return ((cyl.x - cyl.radius - pad, cyl.y - cyl.radius - pad, base - pad),
            (cyl.x + cyl.radius + pad, cyl.y + cyl.radius + pad, base + cyl.height + pad))


def generate_scenario(spec: ScenarioSpec, seed: int | None = None) -> Scenario:
    """Build the cloud, semantic grid and obstacle timeline; deterministic per (spec, seed)."""
    seed = spec.seed if seed is None else seed
    rng = np.random.default_rng(seed)
    t = spec.terrain
    ridges = _ridge_params(t, rng)
    xs = np.linspace(0.0, t.size[0], t.samples[0])
    ys = np.linspace(0.0, t.size[1], t.samples[1])
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    Z = terrain_height(t, X, Y, ridges)
    if t.noise > 0:
        Z = Z + rng.normal(0.0, t.noise, Z.shape)
    if t.spikes:
        idx = rng.choice(Z.size, size=min(t.spikes, Z.size), replace=False)
        Z.flat[idx] += t.spike_height
    cloud = PointCloud(np.column_stack([X.ravel(), Y.ravel(), Z.ravel()]))
    semantic = semantic_grid(spec.semantic, t.size)

    def base(c: Cylinder) -> float:
        return float(terrain_height(t, c.x, c.y, ridges))

    sp = spec.obstacles.point_spacing
    ls = spec.obstacles.layer_spacing
    static = [cylinder_points(c, sp, base(c), ls) for c in spec.obstacles.static]
    static_pts = np.concatenate(static) if static else np.zeros((0, 3))
    timeline = []
    for ev in sorted(spec.obstacles.events, key=lambda e: e.time):
        if ev.action == "add":
            timeline.append(TimedUpdate(ev.time, "add", points=cylinder_points(ev.cylinder, sp, base(ev.cylinder), ls)))
        else:
            timeline.append(TimedUpdate(ev.time, "remove", box=cylinder_box(ev.cylinder, base(ev.cylinder))))
    return Scenario(spec, cloud, semantic, static_pts, timeline, ridges)


def random_cylinders(rng: np.random.Generator, lo, hi, density: float, radius=(0.15, 0.3),
                     height=(0.5, 2.0), keep_clear=()) -> list[Cylinder]:
    """Uniformly placed cylinders at ``density`` per square metre, avoiding ``keep_clear`` disks."""
    area = (hi[0] - lo[0]) * (hi[1] - lo[1])
    n = int(round(density * area))
    out = []
    attempts = 0
    while len(out) < n and attempts < 100 * max(n, 1):
        attempts += 1
        r = rng.uniform(*radius)
        x = rng.uniform(lo[0], hi[0])
        y = rng.uniform(lo[1], hi[1])
        if any((x - cx) ** 2 + (y - cy) ** 2 < (r + cr) ** 2 for cx, cy, cr in keep_clear):
            continue
        out.append(Cylinder(x, y, r, rng.uniform(*height)))
    return out


def two_corridor_map(shape=(40, 30), resolution: float = 0.1, wall_spacing: float = 0.05):
    """Obstacle points for a wall with a narrow and a wide gap.

    Returns ``(points, start, goal)``: start and goal cells sit on opposite
    sides of a vertical wall, the narrow gap lies on the direct line and the
    wide gap off to the side, so more clearance weight buys a longer detour
    through the wide gap.
    """
    nx, ny = shape
    wx = 0.5 * (nx - 1) * resolution
    h = (ny - 1) * resolution
    narrow = (0.35 * h, 0.35 * h + 0.5)
    wide = (0.65 * h, 0.65 * h + 1.0)
    ys = np.arange(0.0, h + 1e-9, wall_spacing)
    keep = ~(((ys > narrow[0]) & (ys < narrow[1])) | ((ys > wide[0]) & (ys < wide[1])))
    pts = np.column_stack([np.full(keep.sum(), wx), ys[keep], np.zeros(keep.sum())])
    start = (int(0.2 * (nx - 1)), int(round((narrow[0] + 0.25) / resolution)))
    goal = (int(0.8 * (nx - 1)), start[1])
    return pts, start, goal


def patch_scenario_spec(seed: int, n_patches: int = 5, levels=(0.2, 1.0), radius=(1.0, 1.8),
                        size=(10.0, 10.0), background: float = 0.05, n_static: int = 2,
                        dynamic: bool = True, terrain: str = "ridged") -> ScenarioSpec:
    """Clean floor with disjoint soiled patches whose levels are spread over ``levels``.

    Levels are evenly spaced with a small jitter and shuffled, so every draw
    mixes light and heavy soiling; static cylinders land anywhere in the
    interior and one more cylinder appears mid-run when ``dynamic``.
    """
    rng = np.random.default_rng(seed)
    w, h = size
    lv = np.clip(np.linspace(levels[0], levels[1], n_patches) + rng.uniform(-0.05, 0.05, n_patches), 0.0, 1.0)
    rng.shuffle(lv)
    patches: list[Patch] = []
    attempts = 0
    while len(patches) < n_patches:
        attempts += 1
        if attempts > 10000:
            raise ConfigError("patches do not fit in the field")
        r = rng.uniform(*radius)
        x, y = rng.uniform(r, w - r), rng.uniform(r, h - r)
        if all((x - p.x) ** 2 + (y - p.y) ** 2 > (r + p.radius) ** 2 for p in patches):
            patches.append(Patch(float(x), float(y), float(r), float(lv[len(patches)])))
    static = tuple(Cylinder(float(rng.uniform(0.2 * w, 0.9 * w)), float(rng.uniform(0.2 * h, 0.9 * h)), 0.3, 1.0)
                   for _ in range(n_static))
    events = ()
    if dynamic:
        c = Cylinder(float(rng.uniform(0.3 * w, 0.7 * w)), float(rng.uniform(0.3 * h, 0.7 * h)), 0.3, 1.0)
        events = (ObstacleEvent(60.0, "add", c),)
    return ScenarioSpec(
        terrain=TerrainSpec(terrain, size, (50, 50), amplitude=0.2, noise=0.002, spikes=5),
        semantic=SemanticSpec("patches", background=background, patches=tuple(patches)),
        obstacles=ObstacleSpec(static=static, events=events),
        seed=seed)
