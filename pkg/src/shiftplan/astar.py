"""8-connected A* on a 2.5-D lattice with an inverse-clearance step penalty.

Each step into cell ``n`` costs its Euclidean length plus
``alpha_clear / (D(n) + epsilon_d)``, where ``D`` is the distance to the
nearest obstacle point. The Euclidean distance to the goal stays an
admissible heuristic because the penalty is non-negative.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass

import numpy as np

from .ikd import DistanceField


class UnreachableError(RuntimeError):
    pass


@dataclass(frozen=True)
class AStarCostParams:
    alpha_clear: float = 0.5
    epsilon_d: float = 0.05
    hard_clearance: float = 0.2

    def __post_init__(self):
        if self.alpha_clear < 0:
            raise ValueError("alpha_clear must be >= 0")
        if not self.epsilon_d > 0:
            raise ValueError("epsilon_d must be > 0")


@dataclass
class SearchGrid:
    """Cell ``(i, j)`` is centred at ``(x0 + i*res, y0 + j*res, z[i, j])``."""

    origin: tuple[float, float]
    resolution: float
    shape: tuple[int, int]
    z: np.ndarray | None = None

    def __post_init__(self):
        if not self.resolution > 0:
            raise ValueError("resolution must be positive")
        if self.z is None:
            self.z = np.zeros(self.shape)
        self.z = np.broadcast_to(np.asarray(self.z, float), self.shape)

    @classmethod
    def from_bounds(cls, lo, hi, resolution: float, height_fn=None, z_offset: float = 0.0) -> "SearchGrid":
        nx = int(math.floor((hi[0] - lo[0]) / resolution + 1e-9)) + 1
        ny = int(math.floor((hi[1] - lo[1]) / resolution + 1e-9)) + 1
        grid = cls((float(lo[0]), float(lo[1])), resolution, (nx, ny))
        if height_fn is not None:
            c = grid.centers()
            grid.z = np.asarray(height_fn(c[..., 0].ravel(), c[..., 1].ravel()), float).reshape(nx, ny) + z_offset
        elif z_offset:
            grid.z = np.full((nx, ny), float(z_offset))
        return grid

    @classmethod
    def from_elevation(cls, emap, z_offset: float = 0.0) -> "SearchGrid":
        return cls(tuple(emap.origin), emap.resolution, emap.z.shape, emap.z + z_offset)

    def centers(self) -> np.ndarray:
        nx, ny = self.shape
        xs = self.origin[0] + self.resolution * np.arange(nx)
        ys = self.origin[1] + self.resolution * np.arange(ny)
        X, Y = np.meshgrid(xs, ys, indexing="ij")
        return np.stack([X, Y, self.z], axis=-1)

    def center(self, cell) -> np.ndarray:
        i, j = cell
        return np.array([self.origin[0] + i * self.resolution,
                         self.origin[1] + j * self.resolution, self.z[i, j]])

    def cell_of(self, x: float, y: float) -> tuple[int, int]:
        i = int(round((x - self.origin[0]) / self.resolution))
        j = int(round((y - self.origin[1]) / self.resolution))
        nx, ny = self.shape
        if not (0 <= i < nx and 0 <= j < ny):
            raise ValueError(f"({x}, {y}) lies outside the search grid")
        return i, j

    def clearance(self, field: DistanceField) -> np.ndarray:
        c = self.centers()
        return field.distance(c.reshape(-1, 3)).reshape(self.shape)


@dataclass(frozen=True)
class AStarPath:
    cells: list
    points: np.ndarray
    cost: float
    clearance: np.ndarray  # D at each point


_MOVES = [(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)]


def astar_search(grid: SearchGrid, start, goal, field: DistanceField,
                 params: AStarCostParams = AStarCostParams(), clearance: np.ndarray | None = None) -> AStarPath:
    """Lowest-cost 8-connected path from ``start`` to ``goal`` (cell indices).

    ``clearance`` may carry a precomputed ``grid.clearance(field)``.
    """
    start = tuple(int(v) for v in start)
    goal = tuple(int(v) for v in goal)
    if start == goal:
        raise ValueError("start and goal coincide")
    D = grid.clearance(field) if clearance is None else clearance
    blocked = D < params.hard_clearance
    for name, c in (("start", start), ("goal", goal)):
        if not (0 <= c[0] < grid.shape[0] and 0 <= c[1] < grid.shape[1]):
            raise ValueError(f"{name} cell {c} outside grid")
        if blocked[c]:
            raise ValueError(f"{name} cell {c} is blocked")

    nx, ny = grid.shape
    res = grid.resolution
    alpha, eps = params.alpha_clear, params.epsilon_d
    penalty = alpha / (D + eps) if alpha > 0 else np.zeros(grid.shape)
    # flat-index lists keep the inner loop free of numpy scalar overhead
    Zf = np.asarray(grid.z, float).ravel()
    pen = penalty.ravel().tolist()
    free = (~blocked).ravel().tolist()
    ii, jj = np.divmod(np.arange(nx * ny), ny)
    gx, gy = goal
    hf = np.sqrt(((ii - gx) * res) ** 2 + ((jj - gy) * res) ** 2 + (Zf - Zf[gx * ny + gy]) ** 2).tolist()
    Z = Zf.tolist()
    moves = [(di, dj, di * ny + dj, (di * res) ** 2 + (dj * res) ** 2) for di, dj in _MOVES]
    s0 = start[0] * ny + start[1]
    gi = goal[0] * ny + goal[1]

    g = {s0: 0.0}
    parent = {s0: -1}
    closed = bytearray(nx * ny)
    heap = [(hf[s0], hf[s0], s0)]
    sqrt = math.sqrt
    push, pop = heapq.heappush, heapq.heappop
    while heap:
        f, hc, cur = pop(heap)
        if closed[cur]:
            continue
        if cur == gi:
            break
        closed[cur] = 1
        ci, cj = divmod(cur, ny)
        gc = g[cur]
        zc = Z[cur]
        for di, dj, dk, d2 in moves:
            ni, nj = ci + di, cj + dj
            if ni < 0 or nj < 0 or ni >= nx or nj >= ny:
                continue
            nb = cur + dk
            if not free[nb] or closed[nb]:
                continue
            dz = Z[nb] - zc
            cand = gc + sqrt(d2 + dz * dz) + pen[nb]
            if cand < g.get(nb, math.inf):
                g[nb] = cand
                parent[nb] = cur
                push(heap, (cand + hf[nb], hf[nb], nb))
    else:
        raise UnreachableError(f"no path from {start} to {goal}")
    if gi not in parent:
        raise UnreachableError(f"no path from {start} to {goal}")

    cells = []
    c = gi
    while c >= 0:
        cells.append(divmod(c, ny))
        c = parent[c]
    cells.reverse()
    pts = np.array([grid.center(c) for c in cells])
    clear = np.array([D[c] for c in cells])
    return AStarPath(cells, pts, g[gi], clear)


def path_clearance(points, field: DistanceField) -> tuple[float, float]:
    """Minimum and mean obstacle distance along a path."""
    pts = np.atleast_2d(np.asarray(points, float))
    if len(pts) == 0:
        raise ValueError("empty path")
    d = field.distance(pts)
    return float(d.min()), float(d.mean())
