"""Convex duality toolkit: conjugates, support and gauge functions, polarity, curvature."""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Sequence

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.spatial import ConvexHull, HalfspaceIntersection

from .errors import (AllInfinite, NonConvexInput, OriginNotInterior,
                     TableTooCoarse)


@dataclass(frozen=True, eq=False)
class ConvexGridFunction:
    """Values on a rectangular grid; ``+inf`` marks points outside the domain."""

    axes: tuple
    values: np.ndarray

    def __post_init__(self):
        axes = tuple(np.asarray(a, dtype=float) for a in self.axes)
        vals = np.asarray(self.values, dtype=float).reshape(tuple(len(a) for a in axes))
        object.__setattr__(self, "axes", axes)
        object.__setattr__(self, "values", vals)

    @classmethod
    def from_function(cls, func: Callable, axes: Sequence) -> "ConvexGridFunction":
        axes = tuple(np.asarray(a, dtype=float) for a in axes)
        pts = _grid_points(axes)
        return cls(axes, np.array([func(p) for p in pts]))

    @property
    def dim(self) -> int:
        return len(self.axes)

    @property
    def spacing(self) -> float:
        return float(max(np.diff(a).max() if len(a) > 1 else 0.0 for a in self.axes))

    def points(self) -> np.ndarray:
        return _grid_points(self.axes)

    def flat(self) -> np.ndarray:
        return self.values.reshape(-1)

    def is_midpoint_convex(self, tol: float = 1e-9) -> bool:
        """Discrete midpoint convexity along every axis."""
        v = self.values
        for k in range(self.dim):
            a = np.moveaxis(v, k, 0)
            if a.shape[0] < 3:
                continue
            lo, mid, hi = a[:-2], a[1:-1], a[2:]
            fin = np.isfinite(lo) & np.isfinite(hi)
            if (mid[fin] > 0.5 * (lo[fin] + hi[fin]) + tol).any():
                return False
        return True


def _grid_points(axes) -> np.ndarray:
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.reshape(-1) for m in mesh], axis=1)


def legendre_fenchel(f: ConvexGridFunction, dual_axes: Sequence, fast: bool = False,
                     chunk: int = 2048) -> ConvexGridFunction:
    """f*(x) = max over grid points h of (h . x - f(h)).

    The direct O(G^2) maximum is the default; ``fast`` uses the lower hull
    of the graph in one dimension and gives the same values.
    """
    dual_axes = tuple(np.asarray(a, dtype=float) for a in dual_axes)
    fin = np.isfinite(f.flat())
    if not fin.any():
        raise AllInfinite("function is +inf everywhere")
    H = f.points()[fin]
    fv = f.flat()[fin]
    X = _grid_points(dual_axes)
    if fast and f.dim == 1:
        out = _lf_1d_hull(H[:, 0], fv, X[:, 0])
    else:
        out = np.empty(len(X))
        for i in range(0, len(X), chunk):
            out[i:i + chunk] = (X[i:i + chunk] @ H.T - fv[None, :]).max(axis=1)
    return ConvexGridFunction(dual_axes, out)


def lower_hull_1d(h: np.ndarray, f: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Vertices of the lower convex hull of the points (h_i, f_i)."""
    order = np.lexsort((f, h))
    h, f = h[order], f[order]
    hx, hy = [], []
    for a, b in zip(h, f):
        if hx and a == hx[-1]:
            continue
        while len(hx) >= 2 and (hy[-1] - hy[-2]) * (a - hx[-1]) >= (b - hy[-1]) * (hx[-1] - hx[-2]):
            hx.pop()
            hy.pop()
        hx.append(a)
        hy.append(b)
    return np.array(hx), np.array(hy)


def _lf_1d_hull(h, f, x):
    hx, hy = lower_hull_1d(h, f)
    if len(hx) == 1:
        return hx[0] * x - hy[0]
    slopes = np.diff(hy) / np.diff(hx)
    idx = np.searchsorted(slopes, x, side="left")
    return hx[idx] * x - hy[idx]


def convex_envelope(f: ConvexGridFunction) -> ConvexGridFunction:
    """Largest convex minorant on the same grid (lower hull, or double conjugate)."""
    if f.dim == 1:
        fin = np.isfinite(f.values)
        hx, hy = lower_hull_1d(f.axes[0][fin], f.values[fin])
        out = np.interp(f.axes[0], hx, hy, left=np.inf, right=np.inf)
        return ConvexGridFunction(f.axes, out)
    slopes = []
    for a in f.axes:
        fin = f.values[np.isfinite(f.values)]
        lip = (fin.max() - fin.min()) / max(np.diff(a).min(), 1e-12)
        slopes.append(np.linspace(-lip, lip, 4 * len(a) + 1))
    fs = legendre_fenchel(f, slopes)
    fss = legendre_fenchel(fs, f.axes)
    return ConvexGridFunction(f.axes, np.minimum(fss.values, f.values))


# -- convex bodies --------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class ConvexBody:
    """Polytope given by its vertices (an interval in one dimension)."""

    vertices: np.ndarray

    def __post_init__(self):
        v = np.atleast_2d(np.asarray(self.vertices, dtype=float))
        if v.shape[1] >= 2 and len(v) > v.shape[1]:
            v = v[ConvexHull(v).vertices]
        elif v.shape[1] == 1:
            v = np.array([[v.min()], [v.max()]])
        object.__setattr__(self, "vertices", v)

    @property
    def dim(self) -> int:
        return self.vertices.shape[1]

    @classmethod
    def from_support_table(cls, directions: np.ndarray, values: np.ndarray) -> "ConvexBody":
        """Intersection of the half-spaces {y : u . y <= tau(u)}; needs tau > 0."""
        u = np.atleast_2d(np.asarray(directions, dtype=float))
        b = np.asarray(values, dtype=float)
        if (b <= 0).any():
            raise OriginNotInterior("support values must be positive")
        if u.shape[1] == 1:
            hi = min(b[i] / u[i, 0] for i in range(len(b)) if u[i, 0] > 0)
            lo = max(b[i] / u[i, 0] for i in range(len(b)) if u[i, 0] < 0)
            return cls(np.array([[lo], [hi]]))
        hs = HalfspaceIntersection(np.hstack([u, -b[:, None]]), np.zeros(u.shape[1]))
        return cls(hs.intersections)

    @classmethod
    def ball(cls, d: int = 2, radius: float = 1.0, n: int = 720) -> "ConvexBody":
        if d == 1:
            return cls(np.array([[-radius], [radius]]))
        if d == 2:
            th = np.linspace(0.0, 2 * np.pi, n, endpoint=False)
            return cls(radius * np.stack([np.cos(th), np.sin(th)], axis=1))
        rng = np.random.default_rng(0)
        g = rng.normal(size=(n, d))
        return cls(radius * g / np.linalg.norm(g, axis=1, keepdims=True))

    @classmethod
    def cube(cls, d: int, half: float = 1.0) -> "ConvexBody":
        return cls(half * np.array(np.meshgrid(*[[-1.0, 1.0]] * d, indexing="ij")).reshape(d, -1).T)

    def equations(self) -> tuple[np.ndarray, np.ndarray]:
        """Facets as A y <= c."""
        return self._equations

    @cached_property
    def _equations(self) -> tuple[np.ndarray, np.ndarray]:
        if self.dim == 1:
            lo, hi = self.vertices[0, 0], self.vertices[1, 0]
            return np.array([[1.0], [-1.0]]), np.array([hi, -lo])
        eq = ConvexHull(self.vertices).equations
        return eq[:, :-1], -eq[:, -1]

    def contains(self, y, tol: float = 1e-12) -> bool:
        A, c = self.equations()
        return bool((A @ np.asarray(y, dtype=float) <= c + tol).all())

    def origin_interior(self) -> bool:
        _, c = self.equations()
        return bool((c > 0).all())


def support_function(K: ConvexBody, x) -> np.ndarray:
    """tau_K(x) = max over vertices of v . x."""
    x = np.asarray(x, dtype=float)
    return (np.atleast_2d(x) @ K.vertices.T).max(axis=1) if x.ndim > 1 else float((K.vertices @ x).max())


def minkowski(K: ConvexBody, h, tol: float = 1e-13) -> float:
    """Gauge alpha_K(h) = inf{r > 0 : h in r K}, by bisection along the ray."""
    if not K.origin_interior():
        raise OriginNotInterior("0 must lie in the interior of K")
    h = np.asarray(h, dtype=float)
    if not np.any(h):
        return 0.0
    lo, hi = 0.0, 1.0
    while not K.contains(h / hi):
        lo, hi = hi, 2 * hi
    while hi - lo > tol * max(hi, 1.0):
        mid = 0.5 * (lo + hi)
        if mid > 0 and K.contains(h / mid):
            hi = mid
        else:
            lo = mid
    return hi


def polar(K: ConvexBody) -> ConvexBody:
    """K* = {y : x . y <= 1 for x in K}."""
    if not K.origin_interior():
        raise OriginNotInterior("0 must lie in the interior of K")
    v = K.vertices
    if K.dim == 1:
        return ConvexBody(np.array([[1.0 / v.min()], [1.0 / v.max()]]))
    hs = HalfspaceIntersection(np.hstack([v, -np.ones((len(v), 1))]), np.zeros(K.dim))
    return ConvexBody(hs.intersections)


def hausdorff_support(K: ConvexBody, L: ConvexBody, n_dirs: int = 2000) -> float:
    """Hausdorff distance via support functions on sampled unit directions."""
    d = K.dim
    if d == 1:
        u = np.array([[1.0], [-1.0]])
    elif d == 2:
        th = np.linspace(0, 2 * np.pi, n_dirs, endpoint=False)
        u = np.stack([np.cos(th), np.sin(th)], axis=1)
    else:
        g = np.random.default_rng(1).normal(size=(n_dirs, d))
        u = g / np.linalg.norm(g, axis=1, keepdims=True)
    return float(np.abs(support_function(K, u) - support_function(L, u)).max())


# -- curvature ------------------------------------------------------------------

@dataclass(frozen=True)
class TauTable:
    """Support function tabulated on equally spaced angles in two dimensions."""

    angles: np.ndarray
    values: np.ndarray

    def spline(self) -> CubicSpline:
        a = np.append(self.angles, self.angles[0] + 2 * np.pi)
        v = np.append(self.values, self.values[0])
        return CubicSpline(a, v, bc_type="periodic")


def tau_curvature(tau, theta: float, step: float = 1e-3, max_spacing: float = 0.05):
    """Radius of curvature tau''(theta) + tau(theta) in d = 2.

    ``tau`` is a callable on R^2 or a :class:`TauTable`. For a callable on
    R^d with d > 2 pass a unit vector as ``theta``; the result is then the
    eigenvalues of the Hessian restricted to the tangent space.
    """
    if isinstance(tau, TauTable):
        sp = np.diff(np.sort(tau.angles)).max()
        if sp > max_spacing:
            raise TableTooCoarse(f"angular spacing {sp:.3g} exceeds {max_spacing}")
        s = tau.spline()
        th = np.mod(theta - tau.angles[0], 2 * np.pi) + tau.angles[0]
        return float(s(th, 2) + s(th))
    theta_arr = np.atleast_1d(np.asarray(theta, dtype=float))
    if theta_arr.size == 1:
        th = float(theta_arr[0])

        def g(a):
            return float(tau(np.array([np.cos(a), np.sin(a)])))
        return (g(th + step) - 2 * g(th) + g(th - step)) / step ** 2 + g(th)
    x = theta_arr / np.linalg.norm(theta_arr)
    H = hessian_tau(tau, x, step)
    B = tangent_frame(x)
    return np.sort(np.linalg.eigvalsh(B.T @ H @ B))


def hessian_tau(tau: Callable, x, step: float = 1e-3) -> np.ndarray:
    """Central-difference Hessian of tau at x."""
    x = np.asarray(x, dtype=float)
    d = len(x)
    H = np.zeros((d, d))
    E = np.eye(d) * step
    for i in range(d):
        for j in range(i, d):
            val = (tau(x + E[i] + E[j]) - tau(x + E[i] - E[j]) - tau(x - E[i] + E[j])
                   + tau(x - E[i] - E[j])) / (4 * step * step)
            H[i, j] = H[j, i] = val
    return H


def tangent_frame(x) -> np.ndarray:
    """Orthonormal basis (as columns) of the complement of x."""
    x = np.asarray(x, dtype=float)
    q, _ = np.linalg.qr(np.column_stack([x, np.eye(len(x))]))
    return q[:, 1:len(x)]


def quadratic_expansion_check(tau: Callable, x, y, t: float = 0.5, radii=None,
                              step: float = 1e-3) -> dict:
    """Cost of splitting x with a transversal displacement against its quadratic model.

    The model is sum_l y_l^2 r_l / (2 t (1 - t) |x|), where r_l are the
    principal radii of curvature at x / |x| (reciprocals of the curvatures).
    The residual is reported relative to sum y^2 / |x|.
    """
    x = np.asarray(x, dtype=float)
    y = np.atleast_1d(np.asarray(y, dtype=float))
    nx = np.linalg.norm(x)
    B = tangent_frame(x)
    if radii is None:
        u = x / nx
        H = hessian_tau(tau, u, step)
        r, V = np.linalg.eigh(B.T @ H @ B)
        dirs = B @ V
    else:
        r = np.atleast_1d(np.asarray(radii, dtype=float))
        dirs = B
    disp = dirs @ y
    cost = tau(t * x + disp) + tau((1 - t) * x - disp) - tau(x)
    model = float((y ** 2 * r).sum() / (2 * t * (1 - t) * nx))
    scale = float((y ** 2).sum() / nx)
    resid = (cost - model) / scale if scale > 0 else float(cost - model)
    return {"cost": float(cost), "model": model, "residual": float(resid)}


def strict_triangle_constant(tau: Callable, pairs: np.ndarray) -> float:
    """min over pairs of (tau(x)+tau(y)-tau(x+y)) / (|x|+|y|-|x+y|)."""
    ratios = []
    for x, y in pairs:
        den = np.linalg.norm(x) + np.linalg.norm(y) - np.linalg.norm(x + y)
        if den > 1e-9 * (np.linalg.norm(x) + np.linalg.norm(y)):
            ratios.append((tau(x) + tau(y) - tau(x + y)) / den)
    return float(min(ratios)) if ratios else np.nan


def ellipse_tau(a: float, b: float) -> Callable:
    """Support function of the ellipse with semi-axes a, b."""
    def tau(x):
        x = np.asarray(x, dtype=float)
        return float(np.sqrt((a * x[0]) ** 2 + (b * x[1]) ** 2))
    return tau


def euclidean_tau(x) -> float:
    return float(np.linalg.norm(x))


# -- rate functions -------------------------------------------------------------

@dataclass
class RateFunctions:
    I: ConvexGridFunction
    I_h: ConvexGridFunction
    lam_h: float
    min_I_h: float
    I_h_at_velocity: float
    velocity: np.ndarray


def rate_functions(lam: ConvexGridFunction, h, v_axes: Sequence) -> RateFunctions:
    """I = lambda*, I_h(v) = I(v) - (h . v - lambda(h)), with sanity values."""
    if not lam.is_midpoint_convex():
        warnings.warn("free-energy grid is not convex; using its envelope", NonConvexInput)
        lam = convex_envelope(lam)
    h = np.atleast_1d(np.asarray(h, dtype=float))
    I = legendre_fenchel(lam, v_axes)
    pts = lam.points()
    i = int(np.argmin(np.linalg.norm(pts - h, axis=1)))
    lam_h = float(lam.flat()[i])
    V = I.points()
    Ih = I.flat() - (V @ h - lam_h)
    grad = _grid_gradient(lam, i)
    I_grad = legendre_fenchel(lam, [[g] for g in grad]).flat()[0]
    at_v = float(I_grad - (grad @ h - lam_h))
    return RateFunctions(I, ConvexGridFunction(I.axes, Ih), lam_h, float(Ih.min()), at_v, grad)


def _grid_gradient(f: ConvexGridFunction, flat_idx: int) -> np.ndarray:
    idx = np.unravel_index(flat_idx, f.values.shape)
    g = np.zeros(f.dim)
    for k, ax in enumerate(f.axes):
        i = idx[k]
        lo, hi = max(i - 1, 0), min(i + 1, len(ax) - 1)
        a = list(idx)
        a[k] = hi
        b = list(idx)
        b[k] = lo
        g[k] = (f.values[tuple(a)] - f.values[tuple(b)]) / (ax[hi] - ax[lo])
    return g
