"""Local trajectory repair around newly observed obstacles.

Every waypoint gets a safety score: the mean, over the waypoints inside a
disk whose radius is its own obstacle clearance, of a weighted blend of
normalized clearance, heading smoothness and feasibility. Waypoints scoring
below ``tau_safe`` flag the index range ``[k - half_width, k + half_width]``;
overlapping ranges merge into windows. Each window's interior is re-solved by
L-BFGS on a clearance + smoothness + length cost (after an A* re-seed when
the interior is in collision) and blended back with a clamped B-spline.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.spatial.distance import cdist

from .astar import AStarCostParams, SearchGrid, UnreachableError, astar_search
from .bspline import BSplineCurve
from .ikd import DistanceField, IncrementalKdTree
from .lbfgs import minimize_lbfgs
from .rficp import CoverageParams, TimedPath, ramp_limit


@dataclass(frozen=True)
class SafetyParams:
    tau_safe: float = 0.6
    w_d: float = 0.5
    w_c: float = 0.3
    w_f: float = 0.2
    d_ref: float = 1.0
    theta_max: float = math.pi / 3
    half_width: int = 5
    r_min: float = 0.1  # floor on the safety-region radius
    hard_clearance: float = 0.2

    def __post_init__(self):
        w = (self.w_d, self.w_c, self.w_f)
        if min(w) < 0 or abs(sum(w) - 1.0) > 1e-9:
            raise ValueError("safety weights must be non-negative and sum to 1")
        if self.half_width < 1:
            raise ValueError("half_width must be >= 1")
        if not self.d_ref > 0 or not self.theta_max > 0:
            raise ValueError("d_ref and theta_max must be positive")


@dataclass(frozen=True)
class SafetyAssessment:
    r_safe: np.ndarray | float
    score: np.ndarray | float
    compliant: np.ndarray | bool


def _points(path) -> np.ndarray:
    return np.asarray(path.positions if isinstance(path, TimedPath) else path, float)


def heading_changes(points: np.ndarray) -> np.ndarray:
    """Turning angle at each waypoint (0 at the ends and on zero-length steps)."""
    pts = np.asarray(points, float)
    out = np.zeros(len(pts))
    if len(pts) < 3:
        return out
    a = pts[1:-1] - pts[:-2]
    b = pts[2:] - pts[1:-1]
    na = np.linalg.norm(a, axis=1)
    nb = np.linalg.norm(b, axis=1)
    ok = (na > 1e-12) & (nb > 1e-12)
    cos = np.ones(len(a))
    cos[ok] = np.sum(a[ok] * b[ok], axis=1) / (na[ok] * nb[ok])
    out[1:-1] = np.arccos(np.clip(cos, -1.0, 1.0))
    return out


def speed_feasible(points, speeds, limits: CoverageParams, tol: float = 1e-9) -> np.ndarray:
    """Per-waypoint check of speed bounds and the ramp inequality on adjacent segments."""
    v = np.asarray(speeds, float)
    ok = (v >= limits.v_min - tol) & (v <= limits.v_max + tol)
    if len(v) > 1:
        seg = np.linalg.norm(np.diff(points, axis=0), axis=1)
        ramp_ok = np.abs(np.diff(v * v)) <= 2 * limits.a_max * seg + tol
        ok[:-1] &= ramp_ok
        ok[1:] &= ramp_ok
    return ok


def point_terms(points, field: DistanceField, params: SafetyParams, speeds=None,
                limits: CoverageParams | None = None, D=None) -> dict:
    """Per-waypoint clearance, continuity and feasibility terms."""
    pts = np.asarray(points, float)
    D = field.distance(pts) if D is None else D
    dist = np.minimum(D / params.d_ref, 1.0)
    cont = 1.0 - np.minimum(heading_changes(pts) / params.theta_max, 1.0)
    feas = D >= params.hard_clearance
    if speeds is not None and limits is not None:
        feas = feas & speed_feasible(pts, speeds, limits)
    feas = feas.astype(float)
    s = params.w_d * dist + params.w_c * cont + params.w_f * feas
    return {"D": D, "dist": dist, "cont": cont, "feas": feas, "s": s}


def safety_score(path, k: int, field: DistanceField, params: SafetyParams = SafetyParams(),
                 speeds=None, limits: CoverageParams | None = None) -> SafetyAssessment:
    """Safety score of waypoint ``k`` over its circular safety region."""
    pts = _points(path)
    if not 0 <= k < len(pts):
        raise IndexError(f"waypoint {k} outside path of length {len(pts)}")
    terms = point_terms(pts, field, params, speeds, limits)
    r = max(float(terms["D"][k]), params.r_min)
    members = np.linalg.norm(pts - pts[k], axis=1) <= r
    score = float(terms["s"][members].mean())
    return SafetyAssessment(r, score, score >= params.tau_safe)


def assess_path(path, field: DistanceField, params: SafetyParams = SafetyParams(), speeds=None,
                limits: CoverageParams | None = None, D=None) -> SafetyAssessment:
    """Scores for every waypoint at once."""
    pts = _points(path)
    terms = point_terms(pts, field, params, speeds, limits, D)
    r = np.maximum(terms["D"], params.r_min)
    s = terms["s"]
    score = np.empty(len(pts))
    chunk = 1024
    for a in range(0, len(pts), chunk):
        d = cdist(pts[a:a + chunk], pts)
        members = d <= r[a:a + chunk, None]
        score[a:a + chunk] = (members @ s) / members.sum(axis=1)
    return SafetyAssessment(r, score, score >= params.tau_safe)


@dataclass(frozen=True)
class Window:
    """Inclusive index range ``[lo, hi]`` scheduled for re-optimization."""

    lo: int
    hi: int
    flagged: tuple = ()

    def __len__(self):
        return self.hi - self.lo + 1

    def free_range(self, n: int) -> tuple[int, int]:
        """Indices that move; the path's own end points never do."""
        return max(self.lo, 1), min(self.hi, n - 2)

    def ctrl_range(self, n: int) -> tuple[int, int]:
        """Free indices plus up to two frozen neighbours per side."""
        f0, f1 = self.free_range(n)
        return max(f0 - 2, 0), min(f1 + 2, n - 1)


def _ranges_to_windows(marks: np.ndarray, flagged: np.ndarray) -> list[Window]:
    windows = []
    n = len(marks)
    k = 0
    while k < n:
        if marks[k]:
            start = k
            while k + 1 < n and marks[k + 1]:
                k += 1
            fl = tuple(int(f) for f in flagged if start <= f <= k)
            windows.append(Window(start, k, fl))
        k += 1
    return windows


def _mark(n: int, centres, half_width: int) -> np.ndarray:
    diff = np.zeros(n + 1, int)
    for c in centres:
        diff[max(c - half_width, 0)] += 1
        diff[min(c + half_width, n - 1) + 1] -= 1
    return np.cumsum(diff[:-1]) > 0


def identify_noncompliant(path, field: DistanceField, params: SafetyParams = SafetyParams(),
                          speeds=None, limits: CoverageParams | None = None,
                          assessment: SafetyAssessment | None = None) -> list[Window]:
    """Union of ``[k - half_width, k + half_width]`` over waypoints scoring below ``tau_safe``."""
    pts = _points(path)
    n = len(pts)
    if n < 2 * params.half_width + 1:
        raise ValueError(f"path needs at least {2 * params.half_width + 1} waypoints")
    if assessment is None:
        assessment = assess_path(pts, field, params, speeds, limits)
    flagged = np.flatnonzero(~np.asarray(assessment.compliant))
    return _ranges_to_windows(_mark(n, flagged, params.half_width), flagged)


def coalesce(windows: list[Window], n: int, gap: int = 2) -> list[Window]:
    """Merge windows whose free ranges are fewer than ``gap`` waypoints apart,
    so no window's frozen neighbours are another window's free points."""
    out: list[Window] = []
    for w in sorted(windows, key=lambda w: w.lo):
        if out and w.free_range(n)[0] - out[-1].free_range(n)[1] - 1 < gap:
            prev = out.pop()
            w = Window(prev.lo, max(prev.hi, w.hi), tuple(sorted(set(prev.flagged) | set(w.flagged))))
        out.append(w)
    return out


# ---------------------------------------------------------------------------
# window cost


@dataclass(frozen=True)
class WindowCostParams:
    w_obs: float = 10.0
    w_smooth: float = 1.0
    w_len: float = 0.1
    d_safe: float = 0.3
    max_iter: int = 200
    grad_tol: float = 1e-6
    cost_tol: float = 1e-10
    history: int = 8
    planar: bool = True  # optimize x, y only; heights stay with the terrain
    precondition: bool = True

    def __post_init__(self):
        if min(self.w_obs, self.w_smooth, self.w_len) < 0:
            raise ValueError("cost weights must be non-negative")
        if not self.d_safe > 0:
            raise ValueError("d_safe must be positive")


class WindowProblem:
    """Cost of one window as a function of its free waypoints."""

    def __init__(self, points, window: Window, field: DistanceField,
                 params: WindowCostParams = WindowCostParams(), margin: float = 0.0):
        pts = np.asarray(points, float)
        n = len(pts)
        self.window = window
        self.field = field
        self.params = params
        self.d_safe = params.d_safe + margin
        self.f0, self.f1 = window.free_range(n)
        self.c0, self.c1 = window.ctrl_range(n)
        if self.f1 < self.f0:
            raise ValueError("window has no free waypoints")
        self.seq = pts[self.c0:self.c1 + 1].copy()
        self.free = slice(self.f0 - self.c0, self.f1 - self.c0 + 1)
        self.dims = 2 if params.planar else 3
        # smoothness + length are quadratic in the free points: J_q = <X, QX> + 2<B, X> + const
        L = len(self.seq)
        D1 = np.diff(np.eye(L), axis=0)
        D2 = np.diff(np.eye(L), n=2, axis=0)
        A = params.w_smooth * D2.T @ D2 + params.w_len * D1.T @ D1
        fixed = np.ones(L, bool)
        fixed[self.free] = False
        self._Q = A[self.free, self.free]
        self._B = A[self.free][:, fixed] @ self.seq[fixed, :self.dims]
        X0 = self.seq[self.free, :self.dims]
        t = self.terms(X0.ravel())
        self._const = t["J_smooth"] + t["J_len"] - float(np.sum(X0 * (self._Q @ X0)) + 2 * np.sum(self._B * X0))
        self._pts = self.seq[self.free].copy()

    @property
    def n_free(self) -> int:
        return self.f1 - self.f0 + 1

    def preconditioner(self, ridge: float = 0.1):
        """Inverse Hessian of the smoothness + length terms, ridged to stay well posed."""
        Hinv = np.linalg.inv(2 * self._Q + ridge * np.eye(self.n_free))
        m, dims = self.n_free, self.dims
        return lambda q: (Hinv @ q.reshape(m, dims)).ravel()

    def x0(self) -> np.ndarray:
        return self.seq[self.free, :self.dims].ravel().copy()

    def unpack(self, x) -> np.ndarray:
        seq = self.seq.copy()
        seq[self.free, :self.dims] = np.asarray(x, float).reshape(self.n_free, self.dims)
        return seq

    def terms(self, x) -> dict:
        """The three cost terms evaluated directly from their definitions."""
        seq = self.unpack(x)
        p = self.params
        free = seq[self.free]
        D, _ = self.field.query(free)
        gap = np.maximum(0.0, self.d_safe - D)
        sec = seq[:-2] - 2 * seq[1:-1] + seq[2:]
        step = np.diff(seq, axis=0)
        return {"J_obs": p.w_obs * float(np.sum(gap ** 2)),
                "J_smooth": p.w_smooth * float(np.sum(sec ** 2)),
                "J_len": p.w_len * float(np.sum(step ** 2))}

    def __call__(self, x) -> tuple[float, np.ndarray]:
        w_obs = self.params.w_obs
        X = x.reshape(self.n_free, self.dims)
        QX = self._Q @ X
        J = float(np.sum(X * QX) + 2 * np.sum(self._B * X)) + self._const
        grad = 2 * (QX + self._B)

        pts = self._pts
        pts[:, :self.dims] = X
        D, near = self.field.query(pts)
        gap = self.d_safe - D
        hit = gap > 0
        if hit.any():
            J += w_obs * float(gap[hit] @ gap[hit])
            act = hit & (D > 0)
            coef = -2 * w_obs * gap[act] / D[act]
            grad[act] += coef[:, None] * (pts[act, :self.dims] - near[act, :self.dims])
        return J, grad.ravel()


def window_cost(x, window: Window, points, field: DistanceField,
                params: WindowCostParams = WindowCostParams(), margin: float = 0.0):
    """``(J, dJ/dx)`` for free waypoints ``x`` of shape ``(m, dims)``."""
    prob = WindowProblem(points, window, field, params, margin)
    J, g = prob(np.asarray(x, float).ravel())
    return J, g.reshape(prob.n_free, prob.dims)


@dataclass
class WindowReport:
    lo: int
    hi: int
    iterations: int
    initial_J: float
    final_J: float
    converged: bool
    min_clearance: float
    message: str = ""
    seeded: bool = False
    costs: list = field(default_factory=list, repr=False)

    def to_json(self) -> dict:
        return {"window": [self.lo, self.hi], "iterations": self.iterations,
                "final_J": self.final_J, "converged": self.converged,
                "min_clearance": self.min_clearance, "seeded": self.seeded}


def optimize_window(window: Window, points, field: DistanceField,
                    params: WindowCostParams = WindowCostParams(),
                    margin: float = 0.0) -> tuple[np.ndarray, WindowReport]:
    """Refine a window's free waypoints; returns the full updated path and a report."""
    pts = np.asarray(points, float)
    prob = WindowProblem(pts, window, field, params, margin)
    h0 = prob.preconditioner() if params.precondition else None
    res = minimize_lbfgs(prob, prob.x0(), params.max_iter, params.grad_tol, params.cost_tol,
                         params.history, h0=h0)
    out = pts.copy()
    out[prob.f0:prob.f1 + 1] = prob.unpack(res.x)[prob.free]
    clear = float(field.distance(out[prob.f0:prob.f1 + 1]).min())
    return out, WindowReport(window.lo, window.hi, res.iterations, res.costs[0], float(res.f),
                             res.converged, clear, res.message, costs=res.costs)


def bspline_reconnect(points, windows: list[Window], degree: int = 3) -> np.ndarray:
    """Blend each window back into the path with a clamped B-spline.

    The window's control polygon (free waypoints plus the frozen neighbours)
    defines the spline; free waypoints are replaced by the spline sampled at
    their Greville abscissae. Everything outside the free ranges is returned
    untouched.
    """
    pts = np.asarray(points, float)
    out = pts.copy()
    n = len(pts)
    for w in windows:
        c0, c1 = w.ctrl_range(n)
        f0, f1 = w.free_range(n)
        ctrl = pts[c0:c1 + 1]
        if degree >= len(ctrl):
            raise ValueError(f"degree {degree} needs more than {len(ctrl)} control points")
        curve = BSplineCurve(ctrl, degree)
        t = curve.greville()[f0 - c0:f1 - c0 + 1]
        out[f0:f1 + 1] = curve(t)
    return out


# ---------------------------------------------------------------------------
# incremental local planner


@dataclass(frozen=True)
class SwoptParams:
    safety: SafetyParams = SafetyParams()
    cost: WindowCostParams = WindowCostParams()
    astar: AStarCostParams = AStarCostParams()
    degree: int = 3
    max_passes: int = 10
    seed_resolution: float = 0.1
    seed_margin: float = 0.8
    clearance_tol: float = 1e-3
    max_window_growth: int = 30
    workers: int = 1
    z_offset: float = 0.0


@dataclass
class PassReport:
    windows: list
    reports: list
    infeasible: list
    latency_ms: float
    max_window_points: int


@dataclass
class UpdateReport:
    passes: list = field(default_factory=list)
    modified: set = field(default_factory=set)

    @property
    def windows(self) -> list:
        return [w for p in self.passes for w in p.windows]

    @property
    def reports(self) -> list:
        return [r for p in self.passes for r in p.reports]

    @property
    def infeasible(self) -> list:
        return [w for p in self.passes for w in p.infeasible]

    @property
    def latencies_ms(self) -> list:
        return [p.latency_ms for p in self.passes]


class LocalPlanner:
    """Keeps a trajectory collision-free as obstacle points arrive or leave.

    Waypoints are *settled* once optimized against the current obstacle
    set; a flagged window made only of settled waypoints whose clearance has
    not changed is already at its optimum and is not re-solved.
    """

    def __init__(self, path, tree: IncrementalKdTree | None = None, params: SwoptParams = SwoptParams(),
                 limits: CoverageParams | None = None, height_fn=None):
        if isinstance(path, TimedPath):
            self.path = path.copy()
        else:
            pts = np.array(path, float)
            self.path = TimedPath(pts, np.zeros(len(pts)), np.ones(len(pts)))
        self.tree = tree if tree is not None else IncrementalKdTree()
        self.params = params
        self.limits = limits
        self.height_fn = height_fn
        self.field = self.tree.snapshot()
        n = len(self.path)
        self._D = self.field.distance(self.path.positions)
        self.settled = np.zeros(n, bool)
        self.margin = np.zeros(n)
        self._last_clear = np.full(n, -np.inf)
        self._next_window_id = 0

    @property
    def points(self) -> np.ndarray:
        return self.path.positions

    def update(self, add=None, remove_box=None, start: int = 0) -> UpdateReport:
        """Apply an obstacle change and repair the path from index ``start`` on."""
        if add is not None and len(add):
            self.tree.insert(add)
        if remove_box is not None:
            self.tree.remove(*remove_box)
        self.field = self.tree.snapshot()
        D = self.field.distance(self.points)
        with np.errstate(invalid="ignore"):  # inf - inf while the tree is empty
            same = (D == self._D) | (np.abs(D - self._D) <= 1e-12)
        self.settled &= same
        self._last_clear[~same] = -np.inf
        self.margin[~same] = 0.0
        self._D = D
        return self.refine(start)

    def refine(self, start: int = 0) -> UpdateReport:
        report = UpdateReport()
        for _ in range(self.params.max_passes):
            pr = self._pass(start, report)
            if pr is None:
                break
            report.passes.append(pr)
        return report

    # one identify -> seed -> optimize -> reconnect sweep
    def _pass(self, start: int, report: UpdateReport) -> PassReport | None:
        t0 = time.perf_counter()
        P = self.params
        sp = P.safety
        pts = self.points[start:]
        n = len(pts)
        if n < 2 * sp.half_width + 1:
            return None
        speeds = self.path.speed[start:] if self.limits is not None else None
        D = self.field.distance(pts)
        assessment = assess_path(pts, self.field, sp, speeds, self.limits, D)
        flagged = np.flatnonzero(~assessment.compliant)
        violating = np.flatnonzero(D < P.cost.d_safe - P.clearance_tol)
        centres = np.union1d(flagged, violating)
        windows = coalesce(_ranges_to_windows(_mark(n, centres, sp.half_width), centres), n)

        settled = self.settled[start:]
        active = []
        for w in windows:
            f0, f1 = w.free_range(n)
            if f1 < f0:
                continue
            if not settled[f0:f1 + 1].all():
                active.append(w)
        if not active:
            return None

        jobs = []
        infeasible = []
        for w in active:
            seeded = self._seed(pts, D, w)
            if seeded is None:
                infeasible.append(w)
                continue
            jobs.append(seeded)

        def run(job):
            w, seed_pts, was_seeded = job
            f0, f1 = w.free_range(n)
            out, rep = optimize_window(w, seed_pts, self.field, P.cost,
                                       float(self.margin[start + f0:start + f1 + 1].max()))
            rep.seeded = was_seeded
            return w, out[f0:f1 + 1], rep

        if P.workers > 1 and len(jobs) > 1:
            with ThreadPoolExecutor(P.workers) as ex:
                results = list(ex.map(run, jobs))
        else:
            results = [run(j) for j in jobs]

        new = pts.copy()
        done = []
        reports = []
        for w, free_pts, rep in results:
            f0, f1 = w.free_range(n)
            new[f0:f1 + 1] = free_pts
            done.append(w)
            reports.append(rep)
        new = bspline_reconnect(new, done, P.degree)
        if self.height_fn is not None:
            for w in done:
                f0, f1 = w.free_range(n)
                seg = new[f0:f1 + 1]
                seg[:, 2] = self.height_fn(seg[:, 0], seg[:, 1]) + P.z_offset

        D_new = self.field.distance(new)
        for w, rep in zip(done, reports):
            f0, f1 = w.free_range(n)
            g0, g1 = start + f0, start + f1
            clear = float(D_new[f0:f1 + 1].min())
            rep.min_clearance = clear
            deficit = P.cost.d_safe - clear
            margin = float(self.margin[g0:g1 + 1].max())
            improving = clear > float(self._last_clear[g0:g1 + 1].min()) + P.clearance_tol
            self._last_clear[g0:g1 + 1] = clear
            # the soft hinge settles just inside d_safe: aim further out while that still helps
            if deficit > P.clearance_tol and improving and margin + deficit <= P.cost.d_safe:
                self.margin[g0:g1 + 1] = margin + deficit + 0.5 * P.clearance_tol
                self.settled[g0:g1 + 1] = False
            else:
                self.settled[g0:g1 + 1] = True
            self.path.window_id[g0:g1 + 1] = self._next_window_id
            self._next_window_id += 1
            report.modified.update(range(g0, g1 + 1))
        self.path.positions[start:] = new
        self._D[start:] = D_new
        if self.limits is not None and len(done):
            seg = np.linalg.norm(np.diff(new, axis=0), axis=1)
            self.path.speed[start:] = ramp_limit(self.path.speed[start:], seg, self.limits.a_max)
        for w in infeasible:
            f0, f1 = w.free_range(n)
            self.settled[start + f0:start + f1 + 1] = True  # nothing better available until the map changes
        latency = (time.perf_counter() - t0) * 1e3
        sizes = [w.ctrl_range(n)[1] - w.ctrl_range(n)[0] + 1 for w in done] or [0]
        shifted = [replace(w, lo=w.lo + start, hi=w.hi + start,
                           flagged=tuple(f + start for f in w.flagged)) for w in done]
        inf_shifted = [replace(w, lo=w.lo + start, hi=w.hi + start,
                               flagged=tuple(f + start for f in w.flagged)) for w in infeasible]
        for rep, w in zip(reports, shifted):
            rep.lo, rep.hi = w.lo, w.hi
        return PassReport(shifted, reports, inf_shifted, latency, max(sizes))

    def _blocked_segments(self, pts, D, a, b) -> bool:
        hc = self.params.safety.hard_clearance
        if np.any(D[a:b + 1] < hc):
            return True
        mids = 0.5 * (pts[a:b] + pts[a + 1:b + 1])
        return bool(np.any(self.field.distance(mids) < hc)) if len(mids) else False

    def _seed(self, pts, D, w: Window):
        """Return ``(window, seeded points, was_seeded)`` or None when infeasible.

        A window whose polygon is in collision is re-seeded with A* between
        its frozen neighbours, growing the window while those are blocked.
        """
        P = self.params
        n = len(pts)
        hc = P.safety.hard_clearance
        f0, f1 = w.free_range(n)
        if not self._blocked_segments(pts, D, f0 - 1, f1 + 1):
            return w, pts, False
        lo, hi = w.lo, w.hi
        for _ in range(P.max_window_growth):
            f0, f1 = Window(lo, hi).free_range(n)
            left_ok = D[f0 - 1] >= hc
            right_ok = D[f1 + 1] >= hc
            if left_ok and right_ok:
                break
            if not left_ok:
                if f0 - 1 == 0:
                    return None
                lo = f0 - 1
            if not right_ok:
                if f1 + 1 == n - 1:
                    return None
                hi = f1 + 1
        else:
            return None
        w = Window(lo, hi, w.flagged)
        f0, f1 = w.free_range(n)
        a, b = pts[f0 - 1], pts[f1 + 1]
        span = pts[f0 - 1:f1 + 2]
        route = None
        # widen the search box before declaring the window infeasible
        for m in P.seed_margin * np.array([1.0, 2.0, 4.0]):
            lo_xy = span[:, :2].min(axis=0) - m
            hi_xy = span[:, :2].max(axis=0) + m
            if self.height_fn is not None:
                grid = SearchGrid.from_bounds(lo_xy, hi_xy, P.seed_resolution, self.height_fn, P.z_offset)
            else:
                grid = SearchGrid.from_bounds(lo_xy, hi_xy, P.seed_resolution)
                grid.z = np.full(grid.shape, 0.5 * (a[2] + b[2]))
            try:
                route = astar_search(grid, grid.cell_of(*a[:2]), grid.cell_of(*b[:2]), self.field, P.astar)
                break
            except UnreachableError:
                continue
            except ValueError:
                return None
        if route is None:
            return None
        poly = route.points.copy()
        poly[0], poly[-1] = a, b
        m_free = f1 - f0 + 1
        seg = np.linalg.norm(np.diff(poly, axis=0), axis=1)
        s = np.concatenate([[0.0], np.cumsum(seg)])
        targets = s[-1] * np.arange(1, m_free + 1) / (m_free + 1)
        seeded = np.column_stack([np.interp(targets, s, poly[:, k]) for k in range(3)])
        out = pts.copy()
        out[f0:f1 + 1] = seeded
        return w, out, True


@dataclass
class SwoptResult:
    path: TimedPath
    report: UpdateReport

    @property
    def points(self) -> np.ndarray:
        return self.path.positions


def ikd_swopt(path, tree: IncrementalKdTree, params: SwoptParams = SwoptParams(), updates=None,
              limits: CoverageParams | None = None, height_fn=None) -> SwoptResult:
    """Insert each batch of obstacle points in ``updates`` and repair the path after each.

    With no updates the path is returned unchanged.
    """
    planner = LocalPlanner(path, tree, params, limits, height_fn)
    total = UpdateReport()
    for batch in updates or []:
        rep = planner.update(add=batch)
        total.passes.extend(rep.passes)
        total.modified |= rep.modified
    return SwoptResult(planner.path, total)
