"""Clamped B-spline bases, shared by the terrain surface and trajectory smoothing.

Basis values and derivatives come from the Cox-de Boor recursion, evaluated
for whole parameter arrays at once.
"""

from __future__ import annotations

import numpy as np


def clamped_knots(n_ctrl: int, degree: int, lo: float = 0.0, hi: float = 1.0) -> np.ndarray:
    """Uniform clamped knot vector for ``n_ctrl`` control points."""
    if degree < 1:
        raise ValueError("degree must be >= 1")
    if n_ctrl < degree + 1:
        raise ValueError(f"need at least degree+1={degree + 1} control points, got {n_ctrl}")
    if not hi > lo:
        raise ValueError("empty parameter range")
    n_inner = n_ctrl - degree - 1
    inner = np.linspace(lo, hi, n_inner + 2)[1:-1]
    return np.concatenate([np.full(degree + 1, lo), inner, np.full(degree + 1, hi)])


def greville(knots: np.ndarray, degree: int) -> np.ndarray:
    """Greville abscissae (knot averages) of each control point."""
    n_ctrl = len(knots) - degree - 1
    return np.array([knots[i + 1:i + degree + 1].mean() for i in range(n_ctrl)])


def _degree0(knots: np.ndarray, t: np.ndarray) -> np.ndarray:
    n = len(knots) - 1
    out = ((knots[:-1][None, :] <= t[:, None]) & (t[:, None] < knots[1:][None, :])).astype(float)
    # the right end of the domain belongs to the last non-empty span
    last = np.nonzero(knots[:-1] < knots[1:])[0][-1]
    at_end = t >= knots[last + 1]
    out[at_end] = 0.0
    out[at_end, last] = 1.0
    return out[:, :n]


def _safe_div(num: np.ndarray, den: np.ndarray) -> np.ndarray:
    out = np.zeros_like(num)
    nz = den != 0
    np.divide(num, den, out=out, where=np.broadcast_to(nz, num.shape))
    return out


def basis(knots: np.ndarray, degree: int, t, nderiv: int = 0) -> list[np.ndarray]:
    """Basis functions and their derivatives at parameters ``t``.

    Returns a list ``[N, N', ..., N^(nderiv)]``; each entry has shape
    ``(len(t), n_ctrl)``.
    """
    knots = np.asarray(knots, dtype=float)
    t = np.atleast_1d(np.asarray(t, dtype=float))
    # table[p] = basis of degree p, shape (m, len(knots) - p - 1)
    table = [_degree0(knots, t)]
    for p in range(1, degree + 1):
        prev = table[-1]
        n_p = len(knots) - p - 1
        i = np.arange(n_p)
        left = _safe_div((t[:, None] - knots[i][None, :]) * prev[:, :n_p],
                         (knots[i + p] - knots[i])[None, :])
        right = _safe_div((knots[i + p + 1][None, :] - t[:, None]) * prev[:, 1:n_p + 1],
                          (knots[i + p + 1] - knots[i + 1])[None, :])
        table.append(left + right)

    def deriv(p: int, k: int) -> np.ndarray:
        if k == 0:
            return table[p]
        lower = deriv(p - 1, k - 1)
        n_p = len(knots) - p - 1
        i = np.arange(n_p)
        a = _safe_div(np.broadcast_to(float(p), (1, n_p)), (knots[i + p] - knots[i])[None, :])
        b = _safe_div(np.broadcast_to(float(p), (1, n_p)), (knots[i + p + 1] - knots[i + 1])[None, :])
        return a * lower[:, :n_p] - b * lower[:, 1:n_p + 1]

    return [deriv(degree, k) if k <= degree else np.zeros_like(table[degree])
            for k in range(nderiv + 1)]


class BSplineCurve:
    """Clamped B-spline curve ``C(t) = sum_i p_i N_{i,k}(t)`` on ``t in [0, 1]``."""

    def __init__(self, control_points, degree: int = 3):
        ctrl = np.asarray(control_points, dtype=float)
        if ctrl.ndim != 2:
            raise ValueError("control points must be an (n, dim) array")
        if degree < 1:
            raise ValueError("degree must be >= 1")
        if degree >= len(ctrl):
            raise ValueError(
                f"degree {degree} needs more than {degree} control points, got {len(ctrl)}")
        self.control_points = ctrl
        self.degree = degree
        self.knots = clamped_knots(len(ctrl), degree)

    def __call__(self, t, nderiv: int = 0):
        bases = basis(self.knots, self.degree, t, nderiv)
        if nderiv == 0:
            return bases[0] @ self.control_points
        return [b @ self.control_points for b in bases]

    def greville(self) -> np.ndarray:
        return greville(self.knots, self.degree)
