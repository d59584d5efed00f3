"""Landmark waypoints on the fitted surface and their boustrophedon ordering."""

from __future__ import annotations

import json
from dataclasses import dataclass, replace

import numpy as np

from .surface import ParametricSurface, footprint_mask


@dataclass(frozen=True)
class LandmarkGrid:
    """Surface points on a uniform parameter lattice.

    ``points[i, j]`` is ``S(u_i, v_j)``; ``adjusted`` adds ``z_offset`` to
    every height. ``valid`` marks nodes inside the surface footprint.
    """

    us: np.ndarray
    vs: np.ndarray
    points: np.ndarray  # (N_u+1, N_v+1, 3)
    valid: np.ndarray
    z_offset: float = 0.0
    adjusted: np.ndarray | None = None

    def __post_init__(self):
        if self.adjusted is None:
            object.__setattr__(self, "adjusted", self.points.copy())

    @property
    def du(self) -> float:
        return float(self.us[1] - self.us[0]) if len(self.us) > 1 else 0.0

    @property
    def dv(self) -> float:
        return float(self.vs[1] - self.vs[0]) if len(self.vs) > 1 else 0.0

    @property
    def shape(self) -> tuple[int, int]:
        return self.points.shape[:2]


def grid_landmarks(surface: ParametricSurface, spacing: float) -> LandmarkGrid:
    """Sample the surface on a lattice whose step approximates ``spacing``."""
    if not spacing > 0:
        raise ValueError("spacing must be positive")
    u0, u1, v0, v1 = surface.bounds
    if spacing > u1 - u0 or spacing > v1 - v0:
        raise ValueError(f"spacing {spacing} exceeds the surface extent")
    n_u = max(1, int(round((u1 - u0) / spacing)))
    n_v = max(1, int(round((v1 - v0) / spacing)))
    us = np.linspace(u0, u1, n_u + 1)
    vs = np.linspace(v0, v1, n_v + 1)
    pts = surface.evaluate_grid(us, vs)[0, 0]
    valid = footprint_mask(surface, us, vs)
    return LandmarkGrid(us, vs, pts, valid)


def apply_offset(grid: LandmarkGrid, z_offset: float) -> LandmarkGrid:
    if z_offset < 0:
        raise ValueError("z_offset must be non-negative")
    adj = grid.points.copy()
    adj[..., 2] += z_offset
    return replace(grid, z_offset=float(z_offset), adjusted=adj)


@dataclass(frozen=True)
class CoveragePath:
    positions: np.ndarray  # (n, 3)
    rows: np.ndarray
    cols: np.ndarray
    directions: dict  # row index -> +1 (increasing column) / -1

    def __len__(self):
        return len(self.positions)

    def cells(self) -> list[tuple[int, int]]:
        return list(zip(self.rows.tolist(), self.cols.tolist()))

    def length(self) -> float:
        return float(np.linalg.norm(np.diff(self.positions, axis=0), axis=1).sum())

    def to_json(self) -> list[dict]:
        return [{"x": float(p[0]), "y": float(p[1]), "z": float(p[2]), "row": int(r), "col": int(c)}
                for p, r, c in zip(self.positions, self.rows, self.cols)]

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh)


def boustrophedon_order(grid: LandmarkGrid, transpose: bool = False) -> CoveragePath:
    """Zigzag over the valid lattice nodes.

    A row is a line of constant ``v`` swept along ``u`` (``transpose`` swaps
    the axes). Even rows run toward increasing column, odd rows back. Invalid
    nodes are skipped, so a row split by a hole continues with its next run.
    """
    pts = grid.adjusted
    valid = grid.valid
    if not transpose:
        pts = pts.transpose(1, 0, 2)
        valid = valid.T
    n_rows, n_cols = valid.shape
    if n_rows == 0 or n_cols == 0:
        raise ValueError("empty grid")
    positions, rows, cols, dirs = [], [], [], {}
    for r in range(n_rows):
        step = 1 if r % 2 == 0 else -1
        dirs[r] = step
        order = range(n_cols) if step > 0 else range(n_cols - 1, -1, -1)
        for c in order:
            if valid[r, c]:
                positions.append(pts[r, c])
                rows.append(r)
                cols.append(c)
    return CoveragePath(np.array(positions, float).reshape(-1, 3),
                        np.array(rows, int), np.array(cols, int), dirs)
