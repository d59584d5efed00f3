"""Coverage ledger: per-cell accumulated coverage and visit counts."""

from __future__ import annotations

import math

import numpy as np

from ..rficp import CoverageParams, SemanticField


class CoverageLedger:
    """Grid aligned with a :class:`SemanticField`; ``c[i, j]`` sits at ``(x0 + i*res, y0 + j*res)``."""

    def __init__(self, semantic: SemanticField):
        self.origin = tuple(float(v) for v in semantic.origin)
        self.resolution = float(semantic.resolution)
        self.shape = semantic.values.shape
        self.c = np.zeros(self.shape)
        self.visits = np.zeros(self.shape, int)

    @property
    def cell_area(self) -> float:
        return self.resolution ** 2

    def xs(self) -> np.ndarray:
        return self.origin[0] + self.resolution * np.arange(self.shape[0])

    def ys(self) -> np.ndarray:
        return self.origin[1] + self.resolution * np.arange(self.shape[1])

    def centers(self) -> np.ndarray:
        X, Y = np.meshgrid(self.xs(), self.ys(), indexing="ij")
        return np.stack([X, Y], axis=-1)

    def cell_of(self, x: float, y: float) -> tuple[int, int]:
        """Nearest cell, clamped to the grid."""
        i = int(round((x - self.origin[0]) / self.resolution))
        j = int(round((y - self.origin[1]) / self.resolution))
        return min(max(i, 0), self.shape[0] - 1), min(max(j, 0), self.shape[1] - 1)

    def copy(self) -> "CoverageLedger":
        out = object.__new__(CoverageLedger)
        out.origin, out.resolution, out.shape = self.origin, self.resolution, self.shape
        out.c = self.c.copy()
        out.visits = self.visits.copy()
        return out

    def to_csv(self, path) -> None:
        """Plot-ready ``x,y,c`` rows."""
        C = self.centers()
        with open(path, "w") as fh:
            fh.write("x,y,c\n")
            for (x, y), c in zip(C.reshape(-1, 2), self.c.ravel()):
                fh.write(f"{x:.6g},{y:.6g},{c:.10g}\n")


def deposit_coverage(ledger: CoverageLedger, position, dwell: float, params: CoverageParams) -> CoverageLedger:
    """Add ``G(q; p) * (1 - exp(-lambda t)) * cell_area`` to every cell within ``R`` of ``p``."""
    if dwell < 0:
        raise ValueError("dwell must be non-negative")
    gain = -math.expm1(-params.lambda_cov * dwell)
    if gain == 0.0:
        return ledger
    res = ledger.resolution
    x, y = float(position[0]), float(position[1])
    nx, ny = ledger.shape
    i0 = max(int(math.floor((x - params.R - ledger.origin[0]) / res)), 0)
    i1 = min(int(math.ceil((x + params.R - ledger.origin[0]) / res)), nx - 1)
    j0 = max(int(math.floor((y - params.R - ledger.origin[1]) / res)), 0)
    j1 = min(int(math.ceil((y + params.R - ledger.origin[1]) / res)), ny - 1)
    if i1 < i0 or j1 < j0:
        return ledger
    qx = ledger.origin[0] + res * np.arange(i0, i1 + 1)
    qy = ledger.origin[1] + res * np.arange(j0, j1 + 1)
    d2 = (qx[:, None] - x) ** 2 + (qy[None, :] - y) ** 2
    sigma = params.sigma
    G = np.exp(-d2 / (2 * sigma * sigma)) / (math.sqrt(2 * math.pi) * sigma)
    G[d2 > params.R * params.R] = 0.0
    block = ledger.c[i0:i1 + 1, j0:j1 + 1]
    np.minimum(block + G * gain * ledger.cell_area, 1.0, out=block)
    return ledger
