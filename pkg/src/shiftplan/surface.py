"""Terrain surface extraction.

A clamped tensor-product B-spline is fitted to a point cloud with the
parameterization ``(u, v) = (x, y)``, so the surface reads
``S(u, v) = (u, v, z(u, v))`` and the elevation map is a direct function of
world coordinates. Curvature is computed from the fundamental forms, outlier
control points are flagged against mean + multiplier * std thresholds and
smoothed with a Laplacian step, and the result is sampled into an
:class:`ElevationMap`.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field, replace
from typing import Iterable, NamedTuple

import numpy as np
from scipy.interpolate import RectBivariateSpline
from scipy.ndimage import distance_transform_edt
from scipy.spatial import ConvexHull, Delaunay, QhullError

from .bspline import basis, clamped_knots, greville


class SurfaceError(ValueError):
    """Base class for surface construction/evaluation failures."""


class FittingError(SurfaceError):
    pass


class DomainError(SurfaceError):
    pass


class SingularPointError(SurfaceError):
    pass


SINGULAR_TOL = 1e-12


# ---------------------------------------------------------------------------
# point clouds


@dataclass(frozen=True)
class PointCloud:
    points: np.ndarray  # (n, 3), meters
    attribute: np.ndarray | None = None  # (n,), in [0, 1]

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 3:
            raise ValueError("points must be an (n, 3) array")
        if not np.all(np.isfinite(pts)):
            raise ValueError("point cloud contains non-finite coordinates")
        object.__setattr__(self, "points", pts)
        if self.attribute is not None:
            a = np.asarray(self.attribute, dtype=float)
            if a.shape != (len(pts),):
                raise ValueError("attribute must have one value per point")
            if np.any((a < 0) | (a > 1)):
                raise ValueError("attribute values must lie in [0, 1]")
            object.__setattr__(self, "attribute", a)

    def __len__(self):
        return len(self.points)


def read_cloud(path) -> PointCloud:
    """Load a cloud from CSV (header ``x,y,z[,a]``) or ASCII PLY."""
    path = str(path)
    if path.lower().endswith(".ply"):
        return _read_ply(path)
    data = np.genfromtxt(path, delimiter=",", names=True, dtype=float)
    names = [n.lower() for n in data.dtype.names]
    if names[:3] != ["x", "y", "z"]:
        raise ValueError(f"{path}: expected header x,y,z[,a], got {','.join(names)}")
    data = np.atleast_1d(data)
    pts = np.column_stack([data[n] for n in data.dtype.names[:3]])
    attr = data[data.dtype.names[3]] if len(names) > 3 and names[3] == "a" else None
    return PointCloud(pts, attr)


def _read_ply(path: str) -> PointCloud:
    with open(path) as fh:
        if fh.readline().strip() != "ply":
            raise ValueError(f"{path}: not a PLY file")
        n_vertex = None
        props: list[str] = []
        in_vertex = False
        for line in fh:
            tok = line.split()
            if not tok:
                continue
            if tok[0] == "format" and tok[1] != "ascii":
                raise ValueError(f"{path}: only ASCII PLY is supported")
            if tok[0] == "element":
                in_vertex = tok[1] == "vertex"
                if in_vertex:
                    n_vertex = int(tok[2])
            elif tok[0] == "property" and in_vertex:
                props.append(tok[-1])
            elif tok[0] == "end_header":
                break
        if n_vertex is None:
            raise ValueError(f"{path}: no vertex element")
        rows = [fh.readline().split() for _ in range(n_vertex)]
    arr = np.array(rows, dtype=float).reshape(n_vertex, len(props))
    idx = [props.index(c) for c in ("x", "y", "z")]
    return PointCloud(arr[:, idx])


def write_cloud_csv(cloud: PointCloud, path) -> None:
    cols = [cloud.points]
    header = "x,y,z"
    if cloud.attribute is not None:
        cols.append(cloud.attribute[:, None])
        header += ",a"
    np.savetxt(path, np.hstack(cols), delimiter=",", header=header, comments="", fmt="%.10g")


# ---------------------------------------------------------------------------
# parametric surface


class SurfacePoint(NamedTuple):
    position: np.ndarray
    su: np.ndarray
    sv: np.ndarray
    suu: np.ndarray
    suv: np.ndarray
    svv: np.ndarray


@dataclass(frozen=True)
class ParametricSurface:
    control: np.ndarray  # (n_u, n_v, 3) control grid
    knots_u: np.ndarray
    knots_v: np.ndarray
    degree_u: int = 3
    degree_v: int = 3
    rms_residual: float = 0.0
    footprint: np.ndarray | None = None  # convex hull vertices of the source cloud (x, y)

    @property
    def bounds(self) -> tuple[float, float, float, float]:
        return (self.knots_u[0], self.knots_u[-1], self.knots_v[0], self.knots_v[-1])

    @property
    def shape(self) -> tuple[int, int]:
        return self.control.shape[:2]

    def greville(self) -> tuple[np.ndarray, np.ndarray]:
        return greville(self.knots_u, self.degree_u), greville(self.knots_v, self.degree_v)

    def with_heights(self, z: np.ndarray) -> "ParametricSurface":
        ctrl = self.control.copy()
        ctrl[..., 2] = z
        return replace(self, control=ctrl)

    def _check_domain(self, u, v):
        u0, u1, v0, v1 = self.bounds
        u = np.asarray(u, dtype=float)
        v = np.asarray(v, dtype=float)
        tol = 1e-12 * max(1.0, abs(u1 - u0), abs(v1 - v0))
        if np.any(u < u0 - tol) or np.any(u > u1 + tol) or np.any(v < v0 - tol) or np.any(v > v1 + tol):
            raise DomainError(f"parameter outside domain [{u0}, {u1}] x [{v0}, {v1}]")
        return np.clip(u, u0, u1), np.clip(v, v0, v1)

    def evaluate_grid(self, us, vs, nderiv: int = 0) -> dict[tuple[int, int], np.ndarray]:
        """Partials on the tensor grid ``us x vs``.

        Returns ``{(a, b): d^(a+b) S / du^a dv^b}`` for ``a + b <= nderiv``,
        each of shape ``(len(us), len(vs), 3)``.
        """
        us, vs = self._check_domain(np.atleast_1d(us), np.atleast_1d(vs))
        bu = basis(self.knots_u, self.degree_u, us, nderiv)
        bv = basis(self.knots_v, self.degree_v, vs, nderiv)
        out = {}
        for a in range(nderiv + 1):
            for b in range(nderiv + 1 - a):
                out[a, b] = np.einsum("ip,pqc,jq->ijc", bu[a], self.control, bv[b])
        return out

    def evaluate_points(self, us, vs, nderiv: int = 0) -> dict[tuple[int, int], np.ndarray]:
        """Partials at scattered parameter pairs; arrays of shape ``(m, 3)``."""
        us, vs = self._check_domain(np.atleast_1d(us), np.atleast_1d(vs))
        bu = basis(self.knots_u, self.degree_u, us, nderiv)
        bv = basis(self.knots_v, self.degree_v, vs, nderiv)
        out = {}
        for a in range(nderiv + 1):
            for b in range(nderiv + 1 - a):
                out[a, b] = np.einsum("mp,pqc,mq->mc", bu[a], self.control, bv[b])
        return out

    def height(self, x, y) -> np.ndarray:
        return self.evaluate_points(x, y)[0, 0][:, 2]


def evaluate(surface: ParametricSurface, u: float, v: float) -> SurfacePoint:
    """Position and exact first/second partials at ``(u, v)``."""
    d = surface.evaluate_points([u], [v], nderiv=2)
    return SurfacePoint(d[0, 0][0], d[1, 0][0], d[0, 1][0], d[2, 0][0], d[1, 1][0], d[0, 2][0])


def _footprint_ok(xy: np.ndarray) -> bool:
    if len(np.unique(xy[:, 0])) < 4 or len(np.unique(xy[:, 1])) < 4:
        return False
    centered = xy - xy.mean(axis=0)
    s = np.linalg.svd(centered, compute_uv=False)
    return s[-1] > 1e-9 * max(s[0], 1e-300)


def _second_divided(g: np.ndarray, i: int) -> tuple[float, float, float]:
    """Weights of the second divided difference at ``g[i]``, scaled by the mean spacing squared."""
    a, b = g[i] - g[i - 1], g[i + 1] - g[i]
    h2 = ((g[-1] - g[0]) / (len(g) - 1)) ** 2
    return 2 * h2 / (a * (a + b)), -2 * h2 / (a * b), 2 * h2 / (b * (a + b))


def _thin_plate_operator(gu: np.ndarray, gv: np.ndarray) -> np.ndarray:
    """Second-difference operator on the control net (uu, uv, vv rows).

    Differences are divided by the Greville spacing, so heights linear in
    (x, y) are in the null space and planes are fitted without bias."""
    n_u, n_v = len(gu), len(gv)
    idx = np.arange(n_u * n_v).reshape(n_u, n_v)
    rows = []

    def row(entries):
        r = np.zeros(n_u * n_v)
        for k, w in entries:
            r[k] += w
        rows.append(r)

    for i in range(1, n_u - 1):
        wa, wb, wc = _second_divided(gu, i)
        for j in range(n_v):
            row([(idx[i - 1, j], wa), (idx[i, j], wb), (idx[i + 1, j], wc)])
    for j in range(1, n_v - 1):
        wa, wb, wc = _second_divided(gv, j)
        for i in range(n_u):
            row([(idx[i, j - 1], wa), (idx[i, j], wb), (idx[i, j + 1], wc)])
    hu = (gu[-1] - gu[0]) / (n_u - 1)
    hv = (gv[-1] - gv[0]) / (n_v - 1)
    for i in range(n_u - 1):
        for j in range(n_v - 1):
            w = np.sqrt(2.0) * hu * hv / ((gu[i + 1] - gu[i]) * (gv[j + 1] - gv[j]))
            row([(idx[i, j], w), (idx[i + 1, j + 1], w), (idx[i + 1, j], -w), (idx[i, j + 1], -w)])
    return np.array(rows) if rows else np.zeros((0, n_u * n_v))


def fit_surface(cloud: PointCloud, degree: int = 3, control_counts: tuple[int, int] = (10, 10),
                regularization: float = 1e-6) -> ParametricSurface:
    """Least-squares clamped B-spline surface through the cloud.

    The x and y control coordinates sit at the Greville abscissae, which
    reproduces the identity parameterization exactly; only heights are solved
    for. ``regularization`` weights a thin-plate (second difference) penalty
    on the control heights that keeps data-free regions well posed.
    """
    pts = cloud.points
    if len(pts) < 16 or not _footprint_ok(pts[:, :2]):
        raise FittingError("degenerate footprint: need a non-collinear cloud with >= 4x4 distinct (x, y)")
    if degree < 3:
        raise FittingError("degree must be >= 3 so second derivatives exist")
    n_u, n_v = control_counts
    if n_u < degree + 1 or n_v < degree + 1:
        raise FittingError(f"control counts must be >= degree+1 = {degree + 1} per axis")
    if (n_u > len(np.unique(pts[:, 0])) or n_v > len(np.unique(pts[:, 1]))
            or n_u * n_v > len(pts)):
        raise FittingError(
            f"over-parameterized: {n_u}x{n_v} control grid exceeds the sample support")

    x0, x1 = pts[:, 0].min(), pts[:, 0].max()
    y0, y1 = pts[:, 1].min(), pts[:, 1].max()
    ku = clamped_knots(n_u, degree, x0, x1)
    kv = clamped_knots(n_v, degree, y0, y1)
    bu = basis(ku, degree, pts[:, 0])[0]
    bv = basis(kv, degree, pts[:, 1])[0]
    design = (bu[:, :, None] * bv[:, None, :]).reshape(len(pts), n_u * n_v)
    gu, gv = greville(ku, degree), greville(kv, degree)
    lhs, rhs = design, pts[:, 2]
    if regularization > 0:
        reg = _thin_plate_operator(gu, gv) * np.sqrt(regularization)
        lhs = np.vstack([design, reg])
        rhs = np.concatenate([rhs, np.zeros(len(reg))])
    coef, *_ = np.linalg.lstsq(lhs, rhs, rcond=None)
    resid = design @ coef - pts[:, 2]

    control = np.empty((n_u, n_v, 3))
    control[..., 0] = gu[:, None]
    control[..., 1] = gv[None, :]
    control[..., 2] = coef.reshape(n_u, n_v)

    hull = None
    try:
        xy = pts[:, :2]
        hull = xy[ConvexHull(xy).vertices]
    except QhullError:
        pass
    return ParametricSurface(control, ku, kv, degree, degree,
                             rms_residual=float(np.sqrt(np.mean(resid ** 2))), footprint=hull)


# ---------------------------------------------------------------------------
# differential geometry


@dataclass(frozen=True)
class FundamentalForms:
    E: float
    F: float
    G: float
    L: float
    M: float
    N: float
    n: np.ndarray


@dataclass(frozen=True)
class CurvatureSample:
    K: float
    H: float
    i: int = 0
    j: int = 0


def _forms_arrays(su, sv, suu, suv, svv):
    cross = np.cross(su, sv)
    norm = np.linalg.norm(cross, axis=-1)
    if np.any(norm <= SINGULAR_TOL):
        raise SingularPointError("|S_u x S_v| vanishes: surface is not regular here")
    n = cross / norm[..., None]
    E = np.sum(su * su, -1)
    F = np.sum(su * sv, -1)
    G = np.sum(sv * sv, -1)
    L = np.sum(suu * n, -1)
    M = np.sum(suv * n, -1)
    N = np.sum(svv * n, -1)
    return E, F, G, L, M, N, n


def fundamental_forms(surface: ParametricSurface, u: float, v: float) -> FundamentalForms:
    p = evaluate(surface, u, v)
    E, F, G, L, M, N, n = _forms_arrays(p.su, p.sv, p.suu, p.suv, p.svv)
    return FundamentalForms(float(E), float(F), float(G), float(L), float(M), float(N), n)


def _curvature_arrays(E, F, G, L, M, N):
    det = E * G - F * F
    if np.any(det <= SINGULAR_TOL):
        raise SingularPointError("first fundamental form is singular (EG - F^2 <= 0)")
    K = (L * N - M * M) / det
    H = (E * N + G * L - 2 * F * M) / (2 * det)
    return K, H


def curvature(forms: FundamentalForms, i: int = 0, j: int = 0) -> CurvatureSample:
    """Gaussian and mean curvature from the fundamental forms."""
    K, H = _curvature_arrays(forms.E, forms.F, forms.G, forms.L, forms.M, forms.N)
    return CurvatureSample(float(K), float(H), i, j)


@dataclass(frozen=True)
class CurvatureField:
    """K and H sampled on a parameter grid ``us x vs``; index ``(i, j)``."""

    us: np.ndarray
    vs: np.ndarray
    K: np.ndarray
    H: np.ndarray

    def samples(self) -> list[CurvatureSample]:
        return [CurvatureSample(float(self.K[i, j]), float(self.H[i, j]), i, j)
                for i in range(self.K.shape[0]) for j in range(self.K.shape[1])]


def curvature_field(surface: ParametricSurface, us=None, vs=None) -> CurvatureField:
    """Curvature on a grid; defaults to the control points' Greville grid,
    so grid index ``(i, j)`` names control point ``(i, j)``."""
    if us is None or vs is None:
        gu, gv = surface.greville()
        us = gu if us is None else us
        vs = gv if vs is None else vs
    d = surface.evaluate_grid(us, vs, nderiv=2)
    E, F, G, L, M, N, _ = _forms_arrays(d[1, 0], d[0, 1], d[2, 0], d[1, 1], d[0, 2])
    K, H = _curvature_arrays(E, F, G, L, M, N)
    return CurvatureField(np.asarray(us, float), np.asarray(vs, float), K, H)


# ---------------------------------------------------------------------------
# outlier filtering


@dataclass(frozen=True)
class CurvatureThresholds:
    K_th: float
    H_th: float
    alpha_k: float
    beta_h: float
    mu_K: float
    sigma_K: float
    mu_H: float
    sigma_H: float


def _as_arrays(samples) -> tuple[np.ndarray, np.ndarray, list[tuple[int, int]]]:
    if isinstance(samples, CurvatureField):
        nu, nv = samples.K.shape
        idx = [(i, j) for i in range(nu) for j in range(nv)]
        return samples.K.ravel(), samples.H.ravel(), idx
    samples = list(samples)
    K = np.array([s.K for s in samples], dtype=float)
    H = np.array([s.H for s in samples], dtype=float)
    return K, H, [(s.i, s.j) for s in samples]


def compute_thresholds(samples: CurvatureField | Iterable[CurvatureSample],
                       alpha_k: float = 2.0, beta_h: float = 2.0) -> CurvatureThresholds:
    K, H, _ = _as_arrays(samples)
    if len(K) < 2:
        raise ValueError("need at least two curvature samples")
    mu_k, sd_k = float(K.mean()), float(K.std())
    mu_h, sd_h = float(H.mean()), float(H.std())
    return CurvatureThresholds(mu_k + alpha_k * sd_k, mu_h + beta_h * sd_h,
                               alpha_k, beta_h, mu_k, sd_k, mu_h, sd_h)


def classify_outliers(samples: CurvatureField | Iterable[CurvatureSample],
                      thresholds: CurvatureThresholds) -> set[tuple[int, int]]:
    """Grid indices where ``|K| > K_th`` or ``|H| > H_th``."""
    K, H, idx = _as_arrays(samples)
    hit = (np.abs(K) > thresholds.K_th) | (np.abs(H) > thresholds.H_th)
    return {idx[k] for k in np.flatnonzero(hit)}


@dataclass(frozen=True)
class SmoothingResult:
    surface: ParametricSurface
    iterations: int
    converged: bool
    history: list[dict] = field(default_factory=list)


def _neighbour_mean(z: np.ndarray) -> np.ndarray:
    total = np.zeros_like(z)
    count = np.zeros_like(z)
    total[1:] += z[:-1]
    count[1:] += 1
    total[:-1] += z[1:]
    count[:-1] += 1
    total[:, 1:] += z[:, :-1]
    count[:, 1:] += 1
    total[:, :-1] += z[:, 1:]
    count[:, :-1] += 1
    return total / count


def laplacian_smooth(surface: ParametricSurface, outliers: Iterable[tuple[int, int]],
                     lambda_smooth: float = 0.5, max_iters: int = 50,
                     thresholds: CurvatureThresholds | None = None) -> SmoothingResult:
    """Pull flagged control heights toward their 4-neighbour mean.

    Every iteration moves each flagged control point by
    ``lambda_smooth * (mean of neighbours - point)``; iteration stops once
    max |K| and max |H| over the flagged cells are within the thresholds
    (frozen from the input surface). Only heights move: x and y of the control
    grid carry the parameterization.
    """
    if not 0.0 <= lambda_smooth < 1.0:
        raise ValueError("lambda_smooth must lie in [0, 1)")
    flagged = sorted(set(outliers))
    if not flagged:
        return SmoothingResult(surface, 0, True)
    if thresholds is None:
        thresholds = compute_thresholds(curvature_field(surface))
    ii, jj = np.array(flagged).T
    z = surface.control[..., 2].copy()
    history = []
    current = surface
    for it in range(1, max_iters + 1):
        mean = _neighbour_mean(z)
        z[ii, jj] += lambda_smooth * (mean[ii, jj] - z[ii, jj])
        current = surface.with_heights(z.copy())
        cf = curvature_field(current)
        kmax = float(np.abs(cf.K[ii, jj]).max())
        hmax = float(np.abs(cf.H[ii, jj]).max())
        history.append({"iteration": it, "max_abs_K": kmax, "max_abs_H": hmax,
                        "mu_K": float(cf.K.mean()), "sigma_K": float(cf.K.std()),
                        "mu_H": float(cf.H.mean()), "sigma_H": float(cf.H.std())})
        if kmax <= thresholds.K_th and hmax <= thresholds.H_th:
            return SmoothingResult(current, it, True, history)
    warnings.warn(f"laplacian_smooth did not converge in {max_iters} iterations", RuntimeWarning)
    return SmoothingResult(current, max_iters, False, history)


def remove_outliers(cloud: PointCloud, surface: ParametricSurface,
                    outliers: Iterable[tuple[int, int]], regularization: float = 1e-6) -> ParametricSurface:
    """Drop samples whose nearest control node is flagged, then refit."""
    flagged = set(outliers)
    if not flagged:
        return surface
    gu, gv = surface.greville()
    iu = np.abs(cloud.points[:, 0:1] - gu[None, :]).argmin(axis=1)
    iv = np.abs(cloud.points[:, 1:2] - gv[None, :]).argmin(axis=1)
    keep = np.array([(a, b) not in flagged for a, b in zip(iu, iv)])
    attr = None if cloud.attribute is None else cloud.attribute[keep]
    return fit_surface(PointCloud(cloud.points[keep], attr), surface.degree_u,
                       surface.shape, regularization)


@dataclass(frozen=True)
class FilterResult:
    surface: ParametricSurface
    outliers: set
    thresholds: CurvatureThresholds
    iterations: int
    converged: bool


def filter_surface(cloud: PointCloud, surface: ParametricSurface, alpha_k: float = 2.0,
                   beta_h: float = 2.0, method: str = "smooth", lambda_smooth: float = 0.5,
                   max_iters: int = 50, regularization: float = 1e-6) -> FilterResult:
    """Detect curvature outliers and either smooth them or refit without them."""
    cf = curvature_field(surface)
    th = compute_thresholds(cf, alpha_k, beta_h)
    out = classify_outliers(cf, th)
    if method == "smooth":
        res = laplacian_smooth(surface, out, lambda_smooth, max_iters, th)
        return FilterResult(res.surface, out, th, res.iterations, res.converged)
    if method == "remove":
        return FilterResult(remove_outliers(cloud, surface, out, regularization), out, th, 1, True)
    raise ValueError(f"unknown filter method {method!r}")


# ---------------------------------------------------------------------------
# elevation map


@dataclass
class ElevationMap:
    """Heights on a regular grid; ``z[i, j]`` sits at ``(x0 + i*res, y0 + j*res)``."""

    origin: tuple[float, float]
    resolution: float
    z: np.ndarray
    mask: np.ndarray
    interpolation: str = "bilinear"

    def __post_init__(self):
        if not self.resolution > 0:
            raise ValueError("resolution must be positive")
        self.z = np.asarray(self.z, dtype=float)
        self.mask = np.asarray(self.mask, dtype=bool)
        if self.mask.shape != self.z.shape:
            raise ValueError("mask shape must match height grid")
        if self.interpolation not in ("bilinear", "bicubic"):
            raise ValueError("interpolation must be 'bilinear' or 'bicubic'")
        self._spline = None

    @property
    def shape(self):
        return self.z.shape

    def node(self, i: int, j: int) -> tuple[float, float]:
        return (self.origin[0] + i * self.resolution, self.origin[1] + j * self.resolution)

    def xs(self) -> np.ndarray:
        return self.origin[0] + self.resolution * np.arange(self.z.shape[0])

    def ys(self) -> np.ndarray:
        return self.origin[1] + self.resolution * np.arange(self.z.shape[1])

    def _cell(self, x, y):
        fx = (np.asarray(x, float) - self.origin[0]) / self.resolution
        fy = (np.asarray(y, float) - self.origin[1]) / self.resolution
        nx, ny = self.z.shape
        eps = 1e-9
        if np.any(fx < -eps) or np.any(fy < -eps) or np.any(fx > nx - 1 + eps) or np.any(fy > ny - 1 + eps):
            raise DomainError("query outside the elevation map")
        fx = np.clip(fx, 0, nx - 1)
        fy = np.clip(fy, 0, ny - 1)
        i = np.minimum(np.floor(fx).astype(int), max(nx - 2, 0))
        j = np.minimum(np.floor(fy).astype(int), max(ny - 2, 0))
        return i, j, fx - i, fy - j

    def query(self, x, y, method: str | None = None):
        """Height at arbitrary (x, y); NaN where a surrounding node is invalid."""
        method = method or self.interpolation
        scalar = np.ndim(x) == 0 and np.ndim(y) == 0
        x = np.atleast_1d(np.asarray(x, float))
        y = np.atleast_1d(np.asarray(y, float))
        i, j, tx, ty = self._cell(x, y)
        i1 = np.minimum(i + 1, self.z.shape[0] - 1)
        j1 = np.minimum(j + 1, self.z.shape[1] - 1)
        valid = self.mask[i, j] & self.mask[i1, j] & self.mask[i, j1] & self.mask[i1, j1]
        if method == "bilinear":
            z = self.z
            out = ((1 - tx) * (1 - ty) * z[i, j] + tx * (1 - ty) * z[i1, j]
                   + (1 - tx) * ty * z[i, j1] + tx * ty * z[i1, j1])
        else:
            out = self._bicubic()(x, y, grid=False)
        out = np.where(valid, out, np.nan)
        return float(out[0]) if scalar else out

    def _bicubic(self):
        if self._spline is None:
            nx, ny = self.z.shape
            if nx < 4 or ny < 4:
                raise ValueError("bicubic interpolation needs at least 4x4 nodes")
            z = self.z.copy()
            if not self.mask.all():
                _, (ii, jj) = distance_transform_edt(~self.mask, return_indices=True)
                z = z[ii, jj]
            self._spline = RectBivariateSpline(self.xs(), self.ys(), z, kx=3, ky=3, s=0)
        return self._spline

    def to_json(self) -> dict:
        nx, ny = self.z.shape
        return {
            "origin": [float(self.origin[0]), float(self.origin[1])],
            "resolution": float(self.resolution),
            "rows": int(nx),
            "cols": int(ny),
            "data": [float(v) if m else None for v, m in zip(self.z.ravel(), self.mask.ravel())],
            "mask": [bool(m) for m in self.mask.ravel()],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "ElevationMap":
        shape = (obj["rows"], obj["cols"])
        data = np.array([np.nan if v is None else v for v in obj["data"]], float).reshape(shape)
        mask = np.array(obj.get("mask", np.isfinite(data).ravel()), bool).reshape(shape)
        return cls(tuple(obj["origin"]), obj["resolution"], np.nan_to_num(data), mask)

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh)

    @classmethod
    def load(cls, path) -> "ElevationMap":
        with open(path) as fh:
            return cls.from_json(json.load(fh))


def footprint_mask(surface: ParametricSurface, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """True for grid nodes inside the source cloud's convex footprint."""
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    if surface.footprint is None or len(surface.footprint) < 3:
        return np.ones(X.shape, bool)
    tri = Delaunay(surface.footprint)
    pts = np.column_stack([X.ravel(), Y.ravel()])
    inside = tri.find_simplex(pts, tol=1e-9) >= 0
    return inside.reshape(X.shape)


def extract_elevation(surface: ParametricSurface, resolution: float,
                      interpolation: str = "bilinear") -> ElevationMap:
    if not resolution > 0:
        raise ValueError("resolution must be positive")
    u0, u1, v0, v1 = surface.bounds
    if resolution > min(u1 - u0, v1 - v0):
        raise ValueError("resolution larger than the surface footprint")
    nx = int(np.floor((u1 - u0) / resolution + 1e-9)) + 1
    ny = int(np.floor((v1 - v0) / resolution + 1e-9)) + 1
    xs = u0 + resolution * np.arange(nx)
    ys = v0 + resolution * np.arange(ny)
    z = surface.evaluate_grid(xs, ys)[0, 0][..., 2]
    mask = footprint_mask(surface, xs, ys)
    return ElevationMap((u0, v0), resolution, z, mask, interpolation)
