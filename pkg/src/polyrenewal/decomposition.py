"""Surcharge geometry, path skeletons, cone points and irreducible pieces."""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import brentq

from . import _kernels
from .environment import EnvironmentField, PotentialLaw, phi_table
from .errors import (DirectionNotTabulated, InsufficientConePoints,
                     LambdaNonpositive, NoConePoints, ScaleTooSmall)
from .lattice import LatticePath, StepDistribution, local_time_profile
from .renewal import RenewalKernel

MEMBERSHIP_TOL = 1e-9
DEFAULT_DELTAS = (0.1, 0.2, 0.3)


# -- norms ---------------------------------------------------------------------

@dataclass(frozen=True)
class PolytopeTau:
    """Support function x -> max_i g_i . x of a finite point set."""

    vertices: np.ndarray

    def __call__(self, x) -> np.ndarray:
        return (np.asarray(x, dtype=float) @ self.vertices.T).max(axis=-1)


@dataclass(frozen=True)
class EuclideanTau:
    scale: float = 1.0

    def __call__(self, x) -> np.ndarray:
        return self.scale * np.linalg.norm(np.asarray(x, dtype=float), axis=-1)


@dataclass(frozen=True)
class DirectionTableTau:
    """Planar norm from values on unit rays, linear in the angle between rays.

    A table spanning less than the full circle only answers directions inside
    its angular range.
    """

    angles: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        order = np.argsort(self.angles)
        object.__setattr__(self, "angles", np.asarray(self.angles, dtype=float)[order])
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float)[order])

    @property
    def full_circle(self) -> bool:
        gaps = np.diff(np.append(self.angles, self.angles[0] + 2 * np.pi))
        return bool(gaps.max() <= np.pi / 8)

    def __call__(self, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        r = np.linalg.norm(x, axis=-1)
        theta = np.arctan2(x[:, 1], x[:, 0])
        if self.full_circle:
            a = np.append(self.angles, self.angles[0] + 2 * np.pi)
            v = np.append(self.values, self.values[0])
            theta = np.where(theta < a[0], theta + 2 * np.pi, theta)
            out = np.interp(theta, a, v)
        else:
            lo, hi = self.angles[0], self.angles[-1]
            wrapped = np.where(theta < lo - 1e-12, theta + 2 * np.pi, theta)
            if np.any((wrapped > hi + 1e-12) & (r > 0)):
                raise DirectionNotTabulated("direction outside the tabulated angular range")
            out = np.interp(wrapped, self.angles, self.values)
        return np.where(r > 0, r * out, 0.0)


def _vectorize(tau: Callable) -> Callable:
    if isinstance(tau, (PolytopeTau, EuclideanTau, DirectionTableTau)):
        return tau

    def batch(x):
        x = np.asarray(x, dtype=float)
        flat = x.reshape(-1, x.shape[-1])
        return np.array([float(tau(row)) for row in flat]).reshape(x.shape[:-1])
    return batch


def sphere_directions(d: int, n: int) -> np.ndarray:
    """Unit directions: equally spaced for d = 2, a Fibonacci lattice for d = 3."""
    if d == 1:
        return np.array([[1.0], [-1.0]])
    if d == 2:
        th = 2 * np.pi * np.arange(n) / n
        return np.column_stack([np.cos(th), np.sin(th)])
    if d == 3:
        k = np.arange(n) + 0.5
        z = 1 - 2 * k / n
        phi = np.pi * (1 + 5 ** 0.5) * k
        s = np.sqrt(1 - z * z)
        return np.column_stack([s * np.cos(phi), s * np.sin(phi), z])
    g = np.random.default_rng(0).standard_normal((n, d))
    return g / np.linalg.norm(g, axis=1, keepdims=True)


def level_set_boundary(func: Callable, level: float, d: int, n_dirs: int = 720,
                       r_max: float = 50.0) -> np.ndarray:
    """Points g(u) = r u with func(r u) = level along unit rays u.

    ``func`` must be convex with func(0) < level.
    """
    if not func(np.zeros(d)) < level:
        raise ValueError("level set does not contain the origin in its interior")
    out = []
    for u in sphere_directions(d, n_dirs):
        hi = 1.0
        while func(hi * u) <= level:
            hi *= 2
            if hi > r_max:
                raise ValueError("level set is unbounded along a ray")
        r = brentq(lambda s: func(s * u) - level, 0.0, hi, xtol=1e-13)
        out.append(r * u)
    return np.array(out)


def level_set_tau(func: Callable, level: float, d: int, n_dirs: int = 720,
                  extra=()) -> PolytopeTau:
    """Support function of a convex level set, from boundary points on rays."""
    pts = level_set_boundary(func, level, d, n_dirs)
    extra = [np.asarray(e, dtype=float).reshape(d) for e in extra]
    if extra:
        pts = np.vstack([pts] + extra)
    return PolytopeTau(pts)


# -- surcharge geometry --------------------------------------------------------

class SurchargeGeometry:
    """A norm tau, a dual drift h and the nested surcharge cones.

    The surcharge of x is tau(x) - h . x; cone i collects the displacements
    with surcharge at most ``deltas[i] * tau(x)``. In the plane each cone is a
    sector, and membership is decided by its two inward edge normals.
    """

    def __init__(self, tau: Callable, h, deltas: Sequence[float] = DEFAULT_DELTAS,
                 walk_range: float = 1.0, lam: float = np.nan, n_check: int = 360):
        self.tau = _vectorize(tau)
        self.h = np.asarray(h, dtype=float).reshape(-1)
        self.d = self.h.size
        self.deltas = tuple(float(x) for x in deltas)
        increasing = all(a < b for a, b in zip(self.deltas, self.deltas[1:]))
        if not (increasing and all(0 < x < 1 for x in self.deltas)):
            raise ValueError("cone parameters must be increasing in (0, 1)")
        if not np.any(self.h):
            raise ValueError("the drift must be nonzero for the cones to be proper")
        self.lam = float(lam)
        self.walk_range = float(walk_range)
        dirs = sphere_directions(self.d, n_check)
        tv = self.tau(dirs)
        if np.any(tv <= 0):
            raise ValueError("tau must be positive off the origin")
        raw = tv - dirs @ self.h
        if np.any(raw < -1e-9 * tv):
            raise ValueError("drift is not dual to tau: negative surcharge found")
        self.r_lambda = self.walk_range * float(tv.max())
        self._normals = [self._sector(dl) for dl in self.deltas] if self.d == 2 else None

    def _sector(self, delta: float) -> np.ndarray:
        th_h = np.arctan2(self.h[1], self.h[0])

        def excess(a):
            u = np.array([np.cos(a), np.sin(a)])
            return float(u @ self.h - (1 - delta) * self.tau(u[None])[0])

        if excess(th_h) <= 0:
            raise ValueError("drift direction is not inside the cone")
        edges = []
        for sign in (1.0, -1.0):
            grid = th_h + sign * np.linspace(0.0, np.pi, 4097)
            vals = np.array([excess(a) for a in grid])
            j = int(np.argmax(vals <= 0))
            edges.append(brentq(excess, grid[j - 1], grid[j], xtol=1e-15)
                         if sign > 0 else brentq(excess, grid[j], grid[j - 1], xtol=1e-15))
        a_plus, a_minus = edges
        return np.array([[np.sin(a_plus), -np.cos(a_plus)],
                         [-np.sin(a_minus), np.cos(a_minus)]])

    def sector_edges(self, which: int = -1) -> np.ndarray:
        """Unit vectors along the two edges of a planar cone."""
        n = self._normals[which]
        return np.array([[-n[0, 1], n[0, 0]], [n[1, 1], -n[1, 0]]])

    def surcharge(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        tv = self.tau(x)
        raw = tv - x @ self.h
        return np.where(raw < 0, 0.0, raw)

    def in_cone(self, x, which: int = -1) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self._normals is not None:
            v = x @ self._normals[which].T
            return np.all(v >= -MEMBERSHIP_TOL, axis=-1)
        tv = self.tau(x)
        return tv - x @ self.h <= self.deltas[which] * tv + MEMBERSHIP_TOL * np.maximum(tv, 1.0)

    def in_diamond(self, points, u, v, which: int = -1) -> np.ndarray:
        points = np.asarray(points, dtype=float)
        return self.in_cone(points - np.asarray(u), which) & self.in_cone(np.asarray(v) - points, which)

    def cone_mask(self, radius: int, which: int = -1) -> np.ndarray:
        side, _ = _kernels.grid_layout(self.d, radius)
        pts = _kernels.unflatten(np.arange(side ** self.d), self.d, radius)
        return self.in_cone(pts, which)


def euclidean_geometry(h, deltas: Sequence[float] = DEFAULT_DELTAS,
                       walk_range: float = 1.0) -> SurchargeGeometry:
    """Test geometry with tau the Euclidean norm; h must have unit length."""
    h = np.asarray(h, dtype=float)
    if abs(np.linalg.norm(h) - 1) > 1e-12:
        raise ValueError("the drift must be a unit vector for the Euclidean norm")
    return SurchargeGeometry(EuclideanTau(), h, deltas, walk_range)


def polymer_geometry(table, h, lam: float | None = None,
                     deltas: Sequence[float] = DEFAULT_DELTAS, n_dirs: int = 720) -> SurchargeGeometry:
    """Geometry of the annealed polymer: tau is the support function of K_lam.

    ``table`` is an :class:`AnnealedTable`; the free energy at g is its
    extrapolated estimate and lam defaults to the estimate at h.
    """
    h = np.asarray(h, dtype=float)
    lam = table.lambda_estimate(h) if lam is None else float(lam)
    if not lam > 0:
        raise LambdaNonpositive(f"free energy at the drift is {lam:.3g}; the polymer is not ballistic")
    tau = level_set_tau(table.lambda_estimate, lam, h.size, n_dirs, extra=[h])
    return SurchargeGeometry(tau, h, deltas, walk_range=table.steps.range, lam=lam)


def walk_geometry(steps: StepDistribution, h, deltas: Sequence[float] = DEFAULT_DELTAS,
                  n_dirs: int = 720) -> SurchargeGeometry:
    """Geometry of the free walk killed at rate log E exp(h . X)."""
    h = np.asarray(h, dtype=float)
    lam = steps.log_mgf(h)
    if not lam > 0:
        raise LambdaNonpositive("the drift gives no positive killing rate")
    tau = level_set_tau(steps.log_mgf, lam, h.size, n_dirs, extra=[h])
    return SurchargeGeometry(tau, h, deltas, walk_range=steps.range, lam=lam)


# -- skeletons -----------------------------------------------------------------

@dataclass
class Skeleton:
    """Trunk and hairs of a path at scale K.

    ``entry[l]`` is the index of trunk vertex u_l, ``exit[l]`` the index of
    the first exit v_{l+1} from U_K(u_l). Hairs walk backwards along each gap
    from u_{l+1} to v_{l+1}; gaps that never leave U_K(u_{l+1}) carry none.
    ``clipped`` marks a path that ends inside U_{K+r} of its last trunk vertex,
    in which case the endpoint closes the trunk without starting a new piece.
    """

    K: float
    r: float
    entry: list
    exit: list
    trunk: np.ndarray
    hairs: list = field(default_factory=list)
    clipped: bool = False

    @property
    def trunk_size(self) -> int:
        return len(self.trunk)


def build_skeleton(geom: SurchargeGeometry, path: LatticePath, K: float,
                   min_scale: float | None = None) -> Skeleton:
    """Split a path into trunk pieces and connectors at scale K."""
    r = geom.r_lambda
    floor = 2 * r if min_scale is None else min_scale
    if K < floor:
        raise ScaleTooSmall(f"K = {K} is below the minimum scale {floor:.3g}")
    V = path.vertices
    n = path.n
    entry, exits = [0], []
    clipped = False
    while True:
        t = entry[-1]
        dist = geom.tau(V[t:] - V[t])
        outside = np.flatnonzero(dist > K)
        if outside.size == 0:
            break
        sigma = t + int(outside[0])
        inside = np.flatnonzero(dist <= K + r)
        nxt = t + int(inside[-1]) + 1
        clipped = nxt > n
        nxt = min(nxt, n)
        exits.append(sigma)
        entry.append(nxt)
        if nxt == n:
            break
    hairs = []
    for l, sigma in enumerate(exits):
        seg = V[sigma:entry[l + 1] + 1][::-1]
        w = [0]
        for i in range(1, len(seg)):
            if geom.tau(seg[i] - seg[w[-1]]) > K:
                w.append(i)
        if len(w) > 1:
            hairs.append(seg[w])
    return Skeleton(K, r, entry, exits, V[entry].copy(), hairs, clipped)


def skeleton_checks(geom: SurchargeGeometry, path: LatticePath, sk: Skeleton) -> dict:
    """Trunk increments in [K, K + r], disjoint trunk pieces, single exit visits."""
    V = path.vertices
    inc_ok, disjoint, single = True, True, True
    pieces = []
    for l, sigma in enumerate(sk.exit):
        t = sk.entry[l]
        d = float(geom.tau(V[sigma] - V[t]))
        inc_ok &= sk.K < d <= sk.K + sk.r + 1e-9
        piece = [tuple(p) for p in V[t:sigma + 1]]
        single &= piece.count(tuple(V[sigma])) == 1
        pieces.append(set(piece))
    if not sk.exit or (sk.entry[-1] > sk.exit[-1] and not sk.clipped):
        pieces.append({tuple(p) for p in V[sk.entry[-1]:]})
    for i in range(len(pieces)):
        for j in range(i + 1, len(pieces)):
            if pieces[i] & pieces[j]:
                disjoint = False
    hair_ok = all(geom.tau(np.diff(h, axis=0)).min() > sk.K if len(h) > 1 else True
                  for h in sk.hairs)
    return {"trunk_increments": bool(inc_ok), "disjoint_pieces": disjoint,
            "single_visit_exits": single, "hair_increments": bool(hair_ok)}


# -- cone points ---------------------------------------------------------------

def cone_points_reference(geom: SurchargeGeometry, path: LatticePath, which: int = -1) -> np.ndarray:
    """Interior indices k with every earlier vertex in gamma_k - Y and every
    later vertex in gamma_k + Y, none equal to gamma_k. Quadratic time."""
    V = path.vertices
    out = []
    for k in range(1, path.n):
        diff = V - V[k]
        same = np.all(diff == 0, axis=1)
        same[k] = False
        if same.any():
            continue
        if geom.in_cone(-diff[:k], which).all() and geom.in_cone(diff[k + 1:], which).all():
            out.append(k)
    return np.array(out, dtype=np.int64)


def cone_points(geom: SurchargeGeometry, path: LatticePath, which: int = -1) -> np.ndarray:
    """Cone points; in the plane a linear sweep over the two edge normals."""
    if geom.d != 2:
        return cone_points_reference(geom, path, which)
    V = path.vertices
    n = path.n
    if n < 2:
        return np.zeros(0, dtype=np.int64)
    proj = V @ geom._normals[which].T
    pre = np.maximum.accumulate(proj, axis=0)
    post = np.minimum.accumulate(proj[::-1], axis=0)[::-1]
    k = np.arange(1, n)
    ok = np.all(proj[k] - pre[k - 1] >= -MEMBERSHIP_TOL, axis=1)
    ok &= np.all(post[k + 1] - proj[k] >= -MEMBERSHIP_TOL, axis=1)
    _, inv, counts = np.unique(V, axis=0, return_inverse=True, return_counts=True)
    ok &= counts[inv.reshape(-1)[k]] == 1
    return k[ok]


@dataclass
class IrreducibleSplit:
    """A path cut at its cone points into a left piece, irreducible middle
    pieces and a right piece."""

    path: LatticePath
    cuts: np.ndarray
    segments: list

    @property
    def classes(self) -> list[str]:
        if len(self.cuts) == 0:
            return ["whole"]
        return ["left"] + ["middle"] * (len(self.segments) - 2) + ["right"]

    @property
    def middle(self) -> list:
        return self.segments[1:-1]

    def reconcatenate(self) -> LatticePath:
        out = self.segments[0]
        for seg in self.segments[1:]:
            out = LatticePath(np.vstack([out.vertices, seg.vertices[1:]]))
        return out


def irreducible_split(geom: SurchargeGeometry, path: LatticePath, which: int = -1,
                      strict: bool = True) -> IrreducibleSplit:
    cuts = cone_points(geom, path, which)
    if len(cuts) == 0:
        if strict:
            raise NoConePoints("path has no cone points")
        return IrreducibleSplit(path, cuts, [path])
    bounds = [0] + cuts.tolist() + [path.n]
    segs = [path.segment(a, b) for a, b in zip(bounds, bounds[1:])]
    return IrreducibleSplit(path, cuts, segs)


def annealed_log_weight(law: PotentialLaw, path: LatticePath, steps: StepDistribution,
                        h, lam: float) -> float:
    """log of exp(h . x - lam n - Phi) P for one path."""
    phi = phi_table(law, path.n + 1)
    Phi = sum(phi[c] for c in local_time_profile(path).values())
    return float(path.log_probability(steps) - Phi + np.dot(h, path.displacement) - lam * path.n)


def quenched_log_weight(env: EnvironmentField, path: LatticePath, steps: StepDistribution,
                        h, lam: float) -> float:
    pts = path.vertices[1:]
    lw = env.law.log_weight(env.value_at(pts)) if len(pts) else np.zeros(0)
    return float(path.log_probability(steps) + lw.sum() + np.dot(h, path.displacement) - lam * path.n)


def factorization_gap(split: IrreducibleSplit, weight: Callable[[LatticePath], float]) -> float:
    """Whole-path log weight minus the sum over the segments."""
    return weight(split.path) - sum(weight(s) for s in split.segments)


# -- irreducible kernel --------------------------------------------------------

@dataclass
class ConeTables:
    """Untilted weights of diamond-confined paths (t) and irreducible pieces (f)
    started at the origin, by length and end point."""

    points: np.ndarray
    radius: int
    t: np.ndarray
    f: np.ndarray
    pieces: np.ndarray
    piece_lengths: np.ndarray
    piece_count: int

    @property
    def n_max(self) -> int:
        return self.t.shape[0] - 1

    def piece_paths(self, steps: StepDistribution) -> list[LatticePath]:
        return [LatticePath.from_steps(steps.steps[self.pieces[i, :m]])
                for i, m in enumerate(self.piece_lengths)]


def cone_tables(geom: SurchargeGeometry, steps: StepDistribution, law: PotentialLaw,
                n_max: int, which: int = -1, collect_cap: int = 0) -> ConeTables:
    """Exact enumeration of cone-confined paths up to length n_max."""
    d, R = steps.dim, steps.range
    radius = max(n_max * R, 1)
    side, strides = _kernels.grid_layout(d, radius)
    n_cells = side ** d
    points = _kernels.unflatten(np.arange(n_cells), d, radius)
    origin = int(radius * strides.sum())
    dr = 2 * radius
    side2, strides2 = _kernels.grid_layout(d, dr)
    mask = geom.cone_mask(dr, which)
    path_disp = points @ strides2 + radius * strides2.sum()
    inc = np.diff(phi_table(law, n_max + 1))
    inc = np.where(np.isnan(inc), np.inf, inc)
    t, f, pieces, lengths, count = _kernels.cone_piece_dfs(
        steps.steps @ strides, steps.probs.astype(float), inc, n_max, n_cells, origin,
        mask, int(dr * strides2.sum()), path_disp.astype(np.int64), int(collect_cap))
    if collect_cap and count > collect_cap:
        return cone_tables(geom, steps, law, n_max, which, collect_cap=int(count))
    keep = min(count, collect_cap)
    return ConeTables(points, radius, t, f, pieces[:keep], lengths[:keep], int(count))


@dataclass
class IrreducibleKernelEstimate:
    kernel: RenewalKernel
    mass_by_length: np.ndarray
    lam: float
    tail_rate: float
    tables: ConeTables

    @property
    def cumulative_mass(self) -> np.ndarray:
        return np.cumsum(self.mass_by_length)

    @property
    def mass(self) -> float:
        return float(self.mass_by_length.sum())


def tilted_piece_kernel(tables: ConeTables, h, lam: float) -> tuple[RenewalKernel, np.ndarray]:
    """f(x, n) = exp(h . x - lam n) times the untilted piece weight."""
    w = tables.f * np.exp(tables.points @ np.asarray(h, dtype=float))[None, :]
    w *= np.exp(-lam * np.arange(tables.n_max + 1))[:, None]
    ns, idx = np.nonzero(w)
    kern = RenewalKernel(tables.points[idx], ns.astype(np.int64), w[ns, idx])
    return kern, w.sum(axis=1)


def estimate_irreducible_kernel(geom: SurchargeGeometry, steps: StepDistribution,
                                law: PotentialLaw, n_max: int, lam: float | None = None,
                                tables: ConeTables | None = None,
                                min_support: int = 2) -> IrreducibleKernelEstimate:
    """Irreducible-piece kernel from exact enumeration up to length n_max."""
    lam = geom.lam if lam is None else float(lam)
    if not np.isfinite(lam):
        raise ValueError("a killing rate is required")
    if tables is None or tables.n_max < n_max:
        tables = cone_tables(geom, steps, law, n_max)
    kern, mass = tilted_piece_kernel(tables, geom.h, lam)
    if len(kern.vals) < min_support:
        raise InsufficientConePoints(
            f"only {len(kern.vals)} irreducible pieces up to length {n_max}")
    ns = np.flatnonzero(mass > 0)
    tail = np.nan
    late = ns[ns >= max(2, n_max // 2)]
    if len(late) >= 3:
        slope = np.polyfit(late, np.log(mass[late]), 1)[0]
        tail = float(-slope)
    return IrreducibleKernelEstimate(kern, mass, lam, tail, tables)


# -- counting bounds and two-point asymptotics ---------------------------------

def forest_count_bound(M: int, N: int, b: int) -> float:
    """Upper bound exp(M log b + (N + M) b / (b - 1)) on forest counts."""
    if b < 2:
        raise ValueError("branching number must be at least 2")
    return float(np.exp(M * np.log(b) + (N + M) * b / (b - 1)))


def count_forests(M: int, N: int, b: int) -> int:
    """Number of ways to hang M vertices below N roots, each vertex with b
    ordered child slots."""

    @lru_cache(maxsize=None)
    def fill(m: int, slots: int) -> int:
        if m == 0:
            return 1
        if slots == 0:
            return 0
        return fill(m, slots - 1) + fill(m - 1, slots - 1 + b)

    return fill(M, N * b)


def killed_green_function(steps: StepDistribution, lam: float, n_max: int) -> tuple[np.ndarray, np.ndarray, float]:
    """G(x) = sum_{n <= n_max} exp(-lam n) P(X_n = x) on the reachable box.

    Returns ``(points, values, tail_bound)``.
    """
    d, R = steps.dim, steps.range
    radius = max(n_max * R, 1)
    side, strides = _kernels.grid_layout(d, radius)
    cur = np.zeros(side ** d)
    origin = int(radius * strides.sum())
    cur[origin] = 1.0
    G = cur.copy()
    shifts = steps.steps @ strides
    disc = np.exp(-lam)
    for _ in range(n_max):
        nxt = np.zeros_like(cur)
        for s, p in zip(shifts, steps.probs):
            if s >= 0:
                nxt[s:] += p * cur[:cur.size - s]
            else:
                nxt[:s] += p * cur[-s:]
        cur = disc * nxt
        G += cur
    pts = _kernels.unflatten(np.arange(side ** d), d, radius)
    tail = float(np.exp(-lam * (n_max + 1)) / (1 - disc))
    return pts, G, tail


@dataclass
class OrnsteinZernikeReport:
    radii: np.ndarray
    scaled: np.ndarray
    power: float
    expected_power: float

    def within(self, tol: float = 0.5) -> bool:
        return abs(self.power - self.expected_power) <= tol


def ornstein_zernike_check(green: Callable, tau: Callable, direction,
                           radii: Sequence[int]) -> OrnsteinZernikeReport:
    """Fit exp(tau(x)) G(x) ~ |x|^(-p) along lattice points near r * direction."""
    tau = _vectorize(tau)
    u = np.asarray(direction, dtype=float)
    u = u / np.linalg.norm(u)
    rs, vals = [], []
    for r in radii:
        x = np.rint(r * u).astype(np.int64)
        g = float(green(x))
        if g > 0:
            rs.append(np.linalg.norm(x))
            vals.append(np.log(g) + float(tau(x.astype(float)[None])[0]))
    rs, vals = np.array(rs), np.array(vals)
    power = float(-np.polyfit(np.log(rs), vals, 1)[0]) if len(rs) >= 2 else np.nan
    return OrnsteinZernikeReport(rs, np.exp(vals), power, (u.size - 1) / 2)
