"""Limited-memory BFGS with Armijo backtracking."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Callable

import numpy as np


@dataclass
class LbfgsResult:
    x: np.ndarray
    f: float
    grad: np.ndarray
    iterations: int
    converged: bool
    message: str
    costs: list = field(default_factory=list)  # accepted-iterate costs, starting with f(x0)


def minimize_lbfgs(fun: Callable[[np.ndarray], tuple[float, np.ndarray]], x0,
                   max_iter: int = 200, grad_tol: float = 1e-6, cost_tol: float = 1e-10,
                   history: int = 8, c1: float = 1e-4, max_backtracks: int = 40,
                   h0: Callable[[np.ndarray], np.ndarray] | None = None) -> LbfgsResult:
    """Minimize ``fun`` (returning value and gradient) from ``x0``.

    ``h0`` optionally applies a fixed symmetric positive definite initial
    inverse Hessian in the two-loop recursion; by default the usual scalar
    ``s'y / y'y`` scaling is used.

    Stops when the gradient 2-norm drops below ``grad_tol``, when an accepted
    step lowers the cost by less than ``cost_tol``, or after ``max_iter``
    iterations. A failed line search returns the last accepted iterate with
    ``converged=False``.
    """
    x = np.array(x0, float).ravel()
    f, g = fun(x)
    costs = [float(f)]
    if max_iter <= 0:
        return LbfgsResult(x, f, g, 0, False, "max_iter is zero", costs)
    s_hist: deque = deque(maxlen=history)
    y_hist: deque = deque(maxlen=history)
    rho_hist: deque = deque(maxlen=history)

    for it in range(max_iter):
        gnorm = float(np.linalg.norm(g))
        if gnorm <= grad_tol:
            return LbfgsResult(x, f, g, it, True, "gradient tolerance", costs)

        # two-loop recursion
        q = g.copy()
        alphas = []
        for s, y, rho in zip(reversed(s_hist), reversed(y_hist), reversed(rho_hist)):
            a = rho * s.dot(q)
            alphas.append(a)
            q -= a * y
        if h0 is not None:
            r = h0(q)
        elif s_hist:
            r = s_hist[-1].dot(y_hist[-1]) / y_hist[-1].dot(y_hist[-1]) * q
        else:
            r = min(1.0, 1.0 / gnorm) * q
        for (s, y, rho), a in zip(zip(s_hist, y_hist, rho_hist), reversed(alphas)):
            b = rho * y.dot(r)
            r += (a - b) * s
        d = -r
        slope = g.dot(d)
        if not slope < 0:
            s_hist.clear()
            y_hist.clear()
            rho_hist.clear()
            d = -h0(g) if h0 is not None else -g * min(1.0, 1.0 / gnorm)
            slope = g.dot(d)

        step = 1.0
        for _ in range(max_backtracks):
            x_new = x + step * d
            f_new, g_new = fun(x_new)
            if f_new <= f + c1 * step * slope:
                break
            step *= 0.5
        else:
            return LbfgsResult(x, f, g, it, False, "line search failed", costs)

        s = x_new - x
        y = g_new - g
        sy = s.dot(y)
        if sy > 1e-12 * max(1.0, np.sqrt(y.dot(y) * s.dot(s))):
            s_hist.append(s)
            y_hist.append(y)
            rho_hist.append(1.0 / sy)
        decrease = f - f_new
        x, f, g = x_new, f_new, g_new
        costs.append(float(f))
        if decrease < cost_tol:
            return LbfgsResult(x, f, g, it + 1, True, "cost tolerance", costs)

    converged = float(np.linalg.norm(g)) <= grad_tol
    return LbfgsResult(x, f, g, max_iter, converged, "max iterations", costs)
