"""Semantic coverage model: attribute -> dwell time -> speed.

Coverage delivered around a waypoint follows a truncated Gaussian kernel of
width ``sigma`` and radius ``R``; dwelling ``t`` seconds saturates as
``1 - exp(-lambda_cov * t)``. Solving for the dwell that brings the local
attribute down to ``C_target`` gives the closed form in :func:`dwell_time`.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import erf

from .landmark import CoveragePath


@dataclass(frozen=True)
class CoverageParams:
    k: float = 1.0
    C_target: float = 0.1
    sigma: float = 0.3
    R: float = 0.9
    lambda_cov: float = 1.0
    v_min: float = 0.1
    v_max: float = 2.0
    a_max: float = 1.0
    delta_s: float = 1.0
    eps_ln: float = 1e-6
    mass_model: str = "cdf"  # "cdf" (1-D normal CDF form) or "disk2d"

    def __post_init__(self):
        if not self.sigma > 0 or not self.R > 0:
            raise ValueError("sigma and R must be positive")
        if not self.lambda_cov > 0:
            raise ValueError("lambda_cov must be positive")
        if not 0 < self.v_min <= self.v_max:
            raise ValueError("need 0 < v_min <= v_max")
        if not self.a_max > 0:
            raise ValueError("a_max must be positive")
        if not 0 < self.eps_ln < 1:
            raise ValueError("eps_ln must lie in (0, 1)")
        if self.mass_model not in ("cdf", "disk2d"):
            raise ValueError("mass_model must be 'cdf' or 'disk2d'")
        if not disk_mass(self.R, self.sigma, self.mass_model) > 0:
            raise ValueError("kernel disk mass must be positive")


def desired_coverage(a, params: CoverageParams):
    return params.k * np.asarray(a, float) if np.ndim(a) else params.k * a


def effective_coverage(a, params: CoverageParams):
    return desired_coverage(a, params) - params.C_target


def gaussian_kernel(p, p_prime, sigma: float, R: float = math.inf):
    """Truncated Gaussian influence of coverage at ``p_prime`` on ``p``.

    Works on a single pair or broadcast arrays of points (last axis = coords).
    """
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    d2 = np.sum((np.asarray(p, float) - np.asarray(p_prime, float)) ** 2, axis=-1)
    g = np.exp(-d2 / (2 * sigma * sigma)) / (math.sqrt(2 * math.pi) * sigma)
    g = np.where(d2 > R * R, 0.0, g)
    return float(g) if np.ndim(g) == 0 else g


def disk_mass(R: float, sigma: float, model: str = "cdf") -> float:
    """Kernel mass inside radius R.

    ``"cdf"`` is ``2 f(R/sigma) - 1`` with ``f`` the standard normal CDF;
    ``"disk2d"`` is the planar disk integral of a unit-mass isotropic Gaussian,
    ``1 - exp(-R^2 / 2 sigma^2)``.
    """
    if not R > 0 or not sigma > 0:
        raise ValueError("R and sigma must be positive")
    ratio = R / sigma
    if model == "cdf":
        return float(erf(ratio / math.sqrt(2.0)))
    if model == "disk2d":
        return float(-math.expm1(-0.5 * ratio * ratio))
    raise ValueError(f"unknown mass model {model!r}")


def _dwell(a, params: CoverageParams):
    eff = np.asarray(effective_coverage(a, params), float)
    mass = disk_mass(params.R, params.sigma, params.mass_model)
    arg = 1.0 - eff / mass
    saturated = (eff > 0) & (arg < params.eps_ln)
    t = -np.log(np.maximum(arg, params.eps_ln)) / params.lambda_cov
    t = np.where(eff > 0, t, 0.0)
    return t, saturated


def dwell_time(a, params: CoverageParams):
    """Seconds of coverage needed at attribute level ``a`` (0 if none needed)."""
    t, _ = _dwell(a, params)
    return float(t) if np.ndim(t) == 0 else t


def is_saturated(a, params: CoverageParams):
    """True where the log argument hit the ``eps_ln`` floor."""
    _, sat = _dwell(a, params)
    return bool(sat) if np.ndim(sat) == 0 else sat


def speed(a, params: CoverageParams):
    """Speed inverse to dwell, ``delta_s / t``, clipped to the limits."""
    t = np.asarray(dwell_time(a, params), float)
    with np.errstate(divide="ignore"):
        v = np.where(t > 0, params.delta_s / np.where(t > 0, t, 1.0), params.v_max)
    v = np.clip(v, params.v_min, params.v_max)
    return float(v) if np.ndim(v) == 0 else v


@dataclass
class SemanticField:
    """Attribute grid; ``values[i, j]`` sits at ``(x0 + i*res, y0 + j*res)``."""

    origin: tuple[float, float]
    resolution: float
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, float)
        if not self.resolution > 0:
            raise ValueError("resolution must be positive")
        if np.any(self.values < 0) or np.any(self.values > 1):
            raise ValueError("semantic values must lie in [0, 1]")

    @property
    def shape(self):
        return self.values.shape

    def xs(self):
        return self.origin[0] + self.resolution * np.arange(self.values.shape[0])

    def ys(self):
        return self.origin[1] + self.resolution * np.arange(self.values.shape[1])

    def sample(self, x, y):
        """Bilinear attribute at (x, y); raises outside the grid."""
        scalar = np.ndim(x) == 0 and np.ndim(y) == 0
        fx = (np.atleast_1d(np.asarray(x, float)) - self.origin[0]) / self.resolution
        fy = (np.atleast_1d(np.asarray(y, float)) - self.origin[1]) / self.resolution
        nx, ny = self.values.shape
        eps = 1e-9
        if np.any(fx < -eps) or np.any(fy < -eps) or np.any(fx > nx - 1 + eps) or np.any(fy > ny - 1 + eps):
            raise ValueError("waypoint outside the semantic field")
        fx = np.clip(fx, 0, nx - 1)
        fy = np.clip(fy, 0, ny - 1)
        i = np.minimum(np.floor(fx).astype(int), max(nx - 2, 0))
        j = np.minimum(np.floor(fy).astype(int), max(ny - 2, 0))
        tx, ty = fx - i, fy - j
        i1 = np.minimum(i + 1, nx - 1)
        j1 = np.minimum(j + 1, ny - 1)
        a = self.values
        out = ((1 - tx) * (1 - ty) * a[i, j] + tx * (1 - ty) * a[i1, j]
               + (1 - tx) * ty * a[i, j1] + tx * ty * a[i1, j1])
        return float(out[0]) if scalar else out

    def to_json(self) -> dict:
        nx, ny = self.values.shape
        return {"origin": [float(self.origin[0]), float(self.origin[1])],
                "resolution": float(self.resolution), "rows": nx, "cols": ny,
                "data": [float(v) for v in self.values.ravel()],
                "mask": [True] * (nx * ny)}

    @classmethod
    def from_json(cls, obj: dict) -> "SemanticField":
        shape = (obj["rows"], obj["cols"])
        data = np.array([0.0 if v is None else v for v in obj["data"]], float).reshape(shape)
        return cls(tuple(obj["origin"]), obj["resolution"], data)

    @classmethod
    def load(cls, path) -> "SemanticField":
        with open(path) as fh:
            return cls.from_json(json.load(fh))


@dataclass
class TimedPath:
    """Waypoints with per-point dwell time (s) and commanded speed (m/s)."""

    positions: np.ndarray
    dwell: np.ndarray
    speed: np.ndarray
    saturated: np.ndarray | None = None
    attribute: np.ndarray | None = None
    rows: np.ndarray | None = None
    cols: np.ndarray | None = None
    window_id: np.ndarray | None = field(default=None)

    def __post_init__(self):
        n = len(self.positions)
        self.positions = np.asarray(self.positions, float)
        self.dwell = np.asarray(self.dwell, float)
        self.speed = np.asarray(self.speed, float)
        if self.saturated is None:
            self.saturated = np.zeros(n, bool)
        if self.window_id is None:
            self.window_id = np.full(n, -1, int)

    def __len__(self):
        return len(self.positions)

    def copy(self) -> "TimedPath":
        def c(a):
            return None if a is None else np.array(a, copy=True)
        return TimedPath(c(self.positions), c(self.dwell), c(self.speed), c(self.saturated),
                         c(self.attribute), c(self.rows), c(self.cols), c(self.window_id))

    def segment_lengths(self) -> np.ndarray:
        return np.linalg.norm(np.diff(self.positions, axis=0), axis=1)

    def length(self) -> float:
        return float(self.segment_lengths().sum())

    def to_records(self) -> list[dict]:
        recs = []
        for k in range(len(self)):
            p = self.positions[k]
            wid = int(self.window_id[k])
            recs.append({"x": float(p[0]), "y": float(p[1]), "z": float(p[2]),
                         "v": float(self.speed[k]), "t_dwell": float(self.dwell[k]),
                         "window_id": wid if wid >= 0 else None})
        return recs

    def save_jsonl(self, path) -> None:
        with open(path, "w") as fh:
            for rec in self.to_records():
                fh.write(json.dumps(rec) + "\n")


def ramp_limit(v, seg, a_max: float) -> np.ndarray:
    """Forward-backward pass so that ``|v[i+1]^2 - v[i]^2| <= 2 a_max seg[i]``."""
    v = np.array(v, float)
    seg = np.asarray(seg, float)
    if not np.isfinite(a_max):
        return v
    for i in range(len(v) - 1):
        cap = math.sqrt(v[i] * v[i] + 2 * a_max * seg[i])
        if v[i + 1] > cap:
            v[i + 1] = cap
    for i in range(len(v) - 2, -1, -1):
        cap = math.sqrt(v[i + 1] * v[i + 1] + 2 * a_max * seg[i])
        if v[i] > cap:
            v[i] = cap
    return v


def allocate_velocities(path: CoveragePath, field_: SemanticField, params: CoverageParams) -> TimedPath:
    pos = path.positions
    a = np.clip(field_.sample(pos[:, 0], pos[:, 1]), 0.0, 1.0)
    t, sat = _dwell(a, params)
    v = speed(a, params)
    v = ramp_limit(np.atleast_1d(v), np.linalg.norm(np.diff(pos, axis=0), axis=1), params.a_max)
    return TimedPath(pos.copy(), np.atleast_1d(t), v, np.atleast_1d(sat), np.atleast_1d(a),
                     path.rows.copy(), path.cols.copy())
