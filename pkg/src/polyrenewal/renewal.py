"""Renewal arrays, the shape equation, tilting and local limit theorems."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.special import logsumexp

from .errors import (DomainExceeded, KernelMismatch, MemoryCap,
                     NewtonDivergence, OutsideLocalDomain, TailTooHeavy,
                     ZeroMass)

NEWTON_TOL = 1e-12
PRUNE_REL = 1e-16
DEGENERATE_DET = 1e-10
CIRCLE_POINTS = 4096
MEMORY_CAP_CELLS = 2 * 10**7


# -- kernels -------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class RenewalKernel:
    """Sparse nonnegative kernel f(x, n) on Z^d x {1, 2, ...}.

    ``tail`` is an optional pair (nu, C) asserting f(x, n) <= C exp(-nu (|x| + n)).
    ``dropped_mass`` records mass removed by pruning.
    """

    xs: np.ndarray
    ns: np.ndarray
    vals: np.ndarray
    tail: tuple | None = None
    dropped_mass: float = 0.0

    def __post_init__(self):
        xs = np.asarray(self.xs, dtype=np.int64)
        if xs.ndim == 1:
            xs = xs.reshape(-1, 1)
        ns = np.asarray(self.ns, dtype=np.int64).reshape(-1)
        vals = np.asarray(self.vals, dtype=float).reshape(-1)
        if not (len(xs) == len(ns) == len(vals)):
            raise ValueError("kernel arrays have mismatched lengths")
        if len(vals) == 0:
            raise ValueError("kernel is empty")
        if (ns < 1).any():
            raise ValueError("kernel times must be at least 1")
        if (vals < 0).any() or not np.isfinite(vals).all():
            raise ValueError("kernel values must be finite and nonnegative")
        for a in (xs, ns, vals):
            a.setflags(write=False)
        object.__setattr__(self, "xs", xs)
        object.__setattr__(self, "ns", ns)
        object.__setattr__(self, "vals", vals)

    @classmethod
    def from_dict(cls, entries: dict, tail=None, prune: bool = True) -> "RenewalKernel":
        """Build from ``{(x..., n): value}`` or ``{((x...), n): value}``."""
        xs, ns, vals = [], [], []
        for key, v in entries.items():
            if len(key) == 2 and isinstance(key[0], (tuple, list, np.ndarray)):
                x, n = tuple(key[0]), key[1]
            else:
                x, n = tuple(key[:-1]), key[-1]
            xs.append(x)
            ns.append(n)
            vals.append(v)
        k = cls(np.array(xs), np.array(ns), np.array(vals, dtype=float), tail)
        return k.pruned() if prune else k

    def pruned(self, rel: float = PRUNE_REL) -> "RenewalKernel":
        """Drop entries below ``rel`` times the maximum of their time slice."""
        keep = np.ones(len(self.vals), dtype=bool)
        for n in np.unique(self.ns):
            sel = self.ns == n
            mx = self.vals[sel].max()
            keep[sel] = self.vals[sel] >= rel * mx if mx > 0 else False
        keep &= self.vals > 0
        if keep.all():
            return self
        if not keep.any():
            raise ValueError("kernel has no positive entries")
        dropped = float(self.vals[~keep].sum())
        return RenewalKernel(self.xs[keep], self.ns[keep], self.vals[keep], self.tail,
                             self.dropped_mass + dropped)

    @property
    def dim(self) -> int:
        return self.xs.shape[1]

    @property
    def mass(self) -> float:
        return float(self.vals.sum())

    @property
    def n_max(self) -> int:
        return int(self.ns.max())

    def is_probability(self, tol: float = 1e-9) -> bool:
        return abs(self.mass - 1.0) <= tol

    def time_marginal(self, n_max: int | None = None) -> np.ndarray:
        n_max = self.n_max if n_max is None else n_max
        out = np.zeros(n_max + 1)
        sel = self.ns <= n_max
        np.add.at(out, self.ns[sel], self.vals[sel])
        return out

    def moments(self) -> dict:
        """Raw moments of (X, T) under the normalised kernel."""
        w = self.vals / self.vals.sum()
        x = self.xs.astype(float)
        t = self.ns.astype(float)
        return {"EX": w @ x, "ET": w @ t, "EXX": (x * w[:, None]).T @ x,
                "EXT": (x * (w * t)[:, None]).sum(axis=0), "ETT": w @ (t * t)}

    def velocity(self) -> np.ndarray:
        m = self.moments()
        return m["EX"] / m["ET"]

    def mean_time(self) -> float:
        return float((self.vals @ self.ns) / self.vals.sum())

    def support_lattice(self) -> dict:
        """Lattice generated by the support points (x, n) in Z^{d+1}."""
        vecs = np.hstack([self.xs, self.ns[:, None]])
        basis = hermite_basis(vecs)
        rank = len(basis)
        det = int(abs(np.prod([basis[i][_pivot(basis[i])] for i in range(rank)]))) if rank else 0
        g = 0
        for n in np.unique(self.ns):
            g = math.gcd(g, int(n))
        full = rank == self.dim + 1
        return {"rank": rank, "det": det if full else 0, "time_gcd": g,
                "spatial_index": det // g if full else 0, "aperiodic": full and det == 1}

    def to_text(self) -> str:
        lines = [f"# d={self.dim}"]
        order = np.lexsort(tuple(self.xs.T[::-1]) + (self.ns,))
        for i in order:
            lines.append(" ".join(str(int(c)) for c in self.xs[i]) + f" {int(self.ns[i])} {self.vals[i]!r}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "RenewalKernel":
        xs, ns, vals = [], [], []
        for raw in text.splitlines():
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) < 3:
                raise ValueError(f"kernel line {raw!r} needs x_1 .. x_d n value")
            xs.append([int(c) for c in parts[:-2]])
            ns.append(int(parts[-2]))
            vals.append(float(parts[-1]))
        return cls(np.array(xs), np.array(ns), np.array(vals))


def _pivot(row) -> int:
    for j, c in enumerate(row):
        if c != 0:
            return j
    return -1


def hermite_basis(vectors) -> list[list[int]]:
    """Row-echelon integer basis (Hermite form) of the lattice spanned by rows."""
    rows = [[int(c) for c in v] for v in np.atleast_2d(vectors)]
    rows = [r for r in rows if any(r)]
    if not rows:
        return []
    m = len(rows[0])
    basis = []
    col = 0
    while rows and col < m:
        nz = [r for r in rows if r[col] != 0]
        rest = [r for r in rows if r[col] == 0]
        if not nz:
            col += 1
            continue
        while len(nz) > 1:
            nz.sort(key=lambda r: abs(r[col]))
            piv = nz[0]
            new = [piv]
            for r in nz[1:]:
                q = r[col] // piv[col]
                r2 = [a - q * b for a, b in zip(r, piv)]
                if r2[col] != 0:
                    new.append(r2)
                elif any(r2):
                    rest.append(r2)
            nz = new
        piv = nz[0]
        if piv[col] < 0:
            piv = [-a for a in piv]
        basis.append(piv)
        rows = rest
        col += 1
    return basis


def preset_kernel(name: str) -> RenewalKernel:
    """Small synthetic kernels used by tests and the command line."""
    if name == "srw1d":
        return RenewalKernel.from_dict({(1, 1): 0.5, (-1, 1): 0.5})
    if name == "srw2d":
        return RenewalKernel.from_dict({(a, b, 1): 0.25 for a in (1, -1) for b in (1, -1)})
    if name == "ballistic":
        return RenewalKernel.from_dict({(1, 1): 1.0})
    if name == "two-step":
        return RenewalKernel.from_dict({(1, 1): 0.5, (2, 2): 0.5})
    if name == "geometric":
        return RenewalKernel.from_dict({(0, n): 2.0 ** -n for n in range(1, 60)}, tail=(np.log(2), 1.0))
    if name == "geometric-pm1":
        return RenewalKernel.from_dict({(s, n): 2.0 ** -n / 2 for n in range(1, 60) for s in (1, -1)},
                                       tail=(np.log(2) / 2, 1.0))
    raise KeyError(f"unknown kernel preset {name!r}")


# -- renewal arrays ------------------------------------------------------------

def renewal_1d(f: Sequence[float], n_max: int) -> np.ndarray:
    """t(0) = 1 and t(n) = sum_{m=1..n} f(m) t(n - m); ``f[0]`` is ignored."""
    f = np.asarray(f, dtype=float)
    if (f < 0).any():
        raise ValueError("renewal weights must be nonnegative")
    fm = np.zeros(n_max + 1)
    k = min(len(f), n_max + 1)
    fm[1:k] = f[1:k]
    t = np.zeros(n_max + 1)
    t[0] = 1.0
    for n in range(1, n_max + 1):
        t[n] = fm[1:n + 1] @ t[n - 1::-1][:n]
    return t


@dataclass
class RenewalArray:
    """Dense slices t(., n) on the box [-radius, radius]^d.

    In window mode only the slices listed in ``kept`` are retained.
    """

    kernel: RenewalKernel
    n_max: int
    radius: int
    slices: dict
    totals: np.ndarray

    def t(self, n: int) -> np.ndarray:
        if n not in self.slices:
            raise KeyError(f"slice {n} was not retained")
        return self.slices[n]

    def t_at(self, x, n: int) -> float:
        x = np.atleast_1d(np.asarray(x, dtype=np.int64))
        if np.abs(x).max() > self.radius:
            return 0.0
        return float(self.t(n)[tuple(x + self.radius)])

    @property
    def dim(self) -> int:
        return self.kernel.dim

    def coords(self) -> np.ndarray:
        d, r = self.dim, self.radius
        return np.indices((2 * r + 1,) * d).reshape(d, -1).T - r

    def residuals(self) -> np.ndarray:
        """Relative residual of the recursion on every retained slice."""
        out = []
        for n in sorted(self.slices):
            if n == 0:
                e = np.zeros_like(self.slices[0])
                e[(self.radius,) * self.dim] = 1.0
                out.append(float(np.abs(self.slices[0] - e).max()))
                continue
            if any(n - m not in self.slices for m in np.unique(self.kernel.ns) if m <= n):
                continue
            rhs = np.zeros_like(self.slices[n])
            for y, m, v in zip(self.kernel.xs, self.kernel.ns, self.kernel.vals):
                if m <= n:
                    _add_shift(rhs, self.slices[n - m], y, v, self.radius)
            scale = max(np.abs(self.slices[n]).max(), 1e-300)
            out.append(float(np.abs(rhs - self.slices[n]).max() / scale))
        return np.array(out)


def _add_shift(dst: np.ndarray, src: np.ndarray, y, coef: float, radius: int) -> None:
    """dst[x] += coef * src[x - y] inside the box."""
    sl_src, sl_dst = [], []
    w = 2 * radius + 1
    for c in y:
        c = int(c)
        if abs(c) >= w:
            return
        if c >= 0:
            sl_src.append(slice(0, w - c))
            sl_dst.append(slice(c, w))
        else:
            sl_src.append(slice(-c, w))
            sl_dst.append(slice(0, w + c))
    dst[tuple(sl_dst)] += coef * src[tuple(sl_src)]


def renewal_multid(f: RenewalKernel, n_max: int, keep: Sequence[int] | None = None,
                   memory_cap: int = MEMORY_CAP_CELLS) -> RenewalArray:
    """Slice-by-slice convolution t(x, n) = sum f(y, m) t(x - y, n - m).

    All slices are stored unless that exceeds ``memory_cap`` cells; then only
    a rolling window plus the slices in ``keep`` are retained. ``MemoryCap``
    is raised if even a single window does not fit.
    """
    d = f.dim
    speed = max(float(np.abs(y).max()) / m for y, m in zip(f.xs, f.ns)) if len(f.vals) else 0.0
    radius = max(int(math.ceil(n_max * speed - 1e-12)), 0)
    cells = (2 * radius + 1) ** d
    window = int(f.ns.max())
    store_all = keep is None and cells * (n_max + 1) <= memory_cap
    if not store_all and cells * (window + 1 + len(keep or ())) > memory_cap:
        raise MemoryCap(f"renewal array needs {cells} cells per slice")
    keep = set(range(n_max + 1)) if store_all else set(keep or ()) | {n_max}
    shape = (2 * radius + 1,) * d
    by_m: dict[int, list] = {}
    for y, m, v in zip(f.xs, f.ns, f.vals):
        by_m.setdefault(int(m), []).append((y, v))
    live: dict[int, np.ndarray] = {}
    t0 = np.zeros(shape)
    t0[(radius,) * d] = 1.0
    live[0] = t0
    kept = {0: t0} if 0 in keep else {}
    totals = np.zeros(n_max + 1)
    totals[0] = 1.0
    for n in range(1, n_max + 1):
        cur = np.zeros(shape)
        for m, entries in by_m.items():
            if m > n:
                continue
            prev = live[n - m]
            for y, v in entries:
                _add_shift(cur, prev, y, v, radius)
        live[n] = cur
        totals[n] = cur.sum()
        if n in keep:
            kept[n] = cur
        drop = n - window
        if drop >= 0 and drop in live:
            del live[drop]
    return RenewalArray(f, n_max, radius, kept, totals)


def conditional_law(array: RenewalArray, n: int) -> np.ndarray:
    """Q_n(x) = t(x, n) / t(n) as a dense array on the array box."""
    tn = array.t(n).sum()
    if not tn > 0:
        raise ZeroMass(f"t({n}) vanishes")
    return array.t(n) / tn


@dataclass
class LimitReport:
    deviations: np.ndarray
    sup_deviation: float
    rate: float
    r_squared: float
    exponential: bool


def renewal_limit_rate(t: Sequence[float], mu: float, n0: int = 1, floor: float = 1e-13) -> LimitReport:
    """Deviations |t(n) - 1/mu| and a log-linear fit of their decay."""
    t = np.asarray(t, dtype=float)
    dev = np.abs(t - 1.0 / mu)
    dev[:n0] = np.nan
    sup = float(np.nanmax(dev[n0:])) if len(t) > n0 else 0.0
    ns = np.arange(len(t))
    ok = (ns >= n0) & (dev > floor)
    if ok.sum() < 3:
        return LimitReport(dev, sup, np.inf, 1.0, True)
    slope, icpt = np.polyfit(ns[ok], np.log(dev[ok]), 1)
    pred = icpt + slope * ns[ok]
    ss = ((np.log(dev[ok]) - pred) ** 2).sum()
    tot = ((np.log(dev[ok]) - np.log(dev[ok]).mean()) ** 2).sum()
    r2 = 1.0 - ss / tot if tot > 0 else 1.0
    return LimitReport(dev, sup, float(-slope), float(r2), bool(r2 > 0.9 and slope < 0))


# -- complex-plane conditions ------------------------------------------------

@dataclass
class ComplexReport:
    radius: float
    zeros_inside: int
    derivative_at_one: float
    kappa: float | None
    twisted_zeros: int | None
    violation: bool


def _fhat(f: RenewalKernel, z: np.ndarray, theta=None) -> np.ndarray:
    coef = f.vals.astype(complex)
    if theta is not None:
        coef = coef * np.exp(1j * (f.xs @ np.atleast_1d(theta)))
    return (coef[None, :] * z[:, None] ** f.ns[None, :]).sum(axis=1)


def _winding(values: np.ndarray) -> int:
    """Winding number about 0 of a closed curve sampled with first == last."""
    ang = np.unwrap(np.angle(values))
    return int(round((ang[-1] - ang[0]) / (2 * np.pi)))


def check_complex_conditions(f: RenewalKernel, eps: float, theta=None,
                              points: int = CIRCLE_POINTS) -> ComplexReport:
    """Zeros of 1 - f^(z) in |z| <= 1 + eps and the lower bound for twisted kernels.

    The zero count uses the argument principle on the circle; kappa is the
    minimum of |1 - f^_theta| over the disk, which is the boundary minimum
    when the twisted function has no zeros inside and zero otherwise.
    """
    r = 1.0 + eps
    if f.tail is not None and not f.tail[0] > math.log(r):
        raise TailTooHeavy(f"tail rate {f.tail[0]} does not exceed log(1+eps)")
    ang = np.linspace(0.0, 2 * np.pi, points + 1)
    z = r * np.exp(1j * ang)
    g = 1.0 - _fhat(f, z)
    zeros = _winding(g)
    deriv = float((f.vals * f.ns).sum())
    kappa, tw = None, None
    if theta is not None:
        gt = 1.0 - _fhat(f, z, theta)
        tw = _winding(gt) if np.abs(gt).min() > 0 else -1
        kappa = float(np.abs(gt).min()) if tw == 0 else 0.0
    violation = zeros != 1 or (kappa is not None and kappa <= 1e-12)
    return ComplexReport(r, zeros, deriv, kappa, tw, bool(violation))


# -- shape equation ------------------------------------------------------------

@dataclass
class ShapePoint:
    xi: np.ndarray
    lam: float
    grad: np.ndarray
    hess: np.ndarray
    mu: float
    grad_log_mu: np.ndarray
    iterations: int
    residual: float


@dataclass
class ShapeSolution:
    points: list = field(default_factory=list)

    @property
    def xi(self) -> np.ndarray:
        return np.array([p.xi for p in self.points])

    @property
    def lam(self) -> np.ndarray:
        return np.array([p.lam for p in self.points])

    def __getitem__(self, i) -> ShapePoint:
        return self.points[i]

    def rows(self) -> list[dict]:
        out = []
        for p in self.points:
            out.append({"xi": p.xi.tolist(), "lambda": p.lam, "grad": p.grad.tolist(),
                        "hess": p.hess.tolist(), "mu": p.mu})
        return out


def shape_F(f: RenewalKernel, xi, lam: float) -> float:
    """log sum f(x, n) exp(xi . x - lam n)."""
    a = f.xs @ np.atleast_1d(np.asarray(xi, dtype=float)) - lam * f.ns
    return float(logsumexp(a, b=f.vals))


def _tilted_weights(f: RenewalKernel, xi, lam):
    a = f.xs @ xi - lam * f.ns
    m = a.max()
    w = f.vals * np.exp(a - m)
    return w, m


def _solve_lambda(f: RenewalKernel, xi: np.ndarray, lam0: float, tol: float, max_iter: int = 200):
    lam = lam0
    it = 0
    for it in range(1, max_iter + 1):
        w, m = _tilted_weights(f, xi, lam)
        s = w.sum()
        F = m + math.log(s)
        if abs(F) <= tol:
            return lam, it, F
        ET = (w @ f.ns) / s
        step = F / ET
        lam_new = lam + step
        if not np.isfinite(lam_new) or abs(step) > 50:
            break
        lam = lam_new
    # bisection fallback; F is strictly decreasing in lam
    lo, hi = lam0 - 1.0, lam0 + 1.0
    k = 0
    while shape_F(f, xi, lo) < 0:
        lo -= 2.0 ** k
        k += 1
        if k > 60:
            raise NewtonDivergence("no lower bracket for the shape equation")
    k = 0
    while shape_F(f, xi, hi) > 0:
        hi += 2.0 ** k
        k += 1
        if k > 60:
            raise NewtonDivergence("no upper bracket for the shape equation")
    for it2 in range(400):
        mid = 0.5 * (lo + hi)
        F = shape_F(f, xi, mid)
        if abs(F) <= tol or hi - lo < 1e-15:
            return mid, it + it2, F
        if F > 0:
            lo = mid
        else:
            hi = mid
    raise NewtonDivergence("bisection did not converge")


def _check_domain(f: RenewalKernel, xi: np.ndarray, margin: float) -> None:
    if f.tail is not None and np.linalg.norm(xi) >= f.tail[0] - margin:
        raise DomainExceeded(f"|xi| = {np.linalg.norm(xi):.3g} outside the tail-certified domain")


def solve_shape_point(f: RenewalKernel, xi, lam0: float = 0.0, tol: float = NEWTON_TOL,
                      margin: float = 0.05) -> ShapePoint:
    """Solve F(xi, lam) = 0 and differentiate the solution analytically.

    Derivatives use cumulants of the tilted kernel: with F = log M,
    F_xi = E X, F_lam = -E T, F_xixi = Cov X, F_xilam = -Cov(X, T),
    F_lamlam = Var T, and the implicit-function theorem.
    """
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    if xi.shape[0] != f.dim:
        raise ValueError("xi has the wrong dimension")
    _check_domain(f, xi, margin)
    lam, it, res = _solve_lambda(f, xi, lam0, tol)
    w, _ = _tilted_weights(f, xi, lam)
    p = w / w.sum()
    X = f.xs.astype(float)
    T = f.ns.astype(float)
    EX, ET = p @ X, p @ T
    cX = X - EX
    cT = T - ET
    covXX = (cX * p[:, None]).T @ cX
    covXT = (cX * (p * cT)[:, None]).sum(axis=0)
    varT = p @ (cT * cT)
    grad = EX / ET
    hess = (covXX - np.outer(covXT, grad) - np.outer(grad, covXT) + varT * np.outer(grad, grad)) / ET
    # f_xi(x, n) = f e^{xi x - lam n} sums to exp(F) = 1 at the solution
    mass = math.exp(res)
    mu = float(mass * ET)
    glm = (p @ (T[:, None] * (X - np.outer(T, grad)))) / ET
    return ShapePoint(xi, float(lam), grad, 0.5 * (hess + hess.T), mu, glm, it, float(res))


def solve_shape(f: RenewalKernel, xi, tol: float = NEWTON_TOL, margin: float = 0.05) -> ShapeSolution:
    """Solve the shape equation at a point or along a grid with warm starts."""
    grid = np.atleast_2d(np.asarray(xi, dtype=float))
    if f.dim == 1 and grid.shape[0] == 1 and grid.shape[1] > 1:
        grid = grid.T
    sol = ShapeSolution()
    lam = 0.0
    for x in grid:
        pt = solve_shape_point(f, x, lam, tol, margin)
        lam = pt.lam
        sol.points.append(pt)
    return sol


def centered_moment_hessian(f: RenewalKernel) -> np.ndarray:
    """E[(X - vT)(X - vT)^T] / E T for a probability kernel at xi = 0."""
    m = f.moments()
    v = m["EX"] / m["ET"]
    H = m["EXX"] - np.outer(m["EXT"], v) - np.outer(v, m["EXT"]) + m["ETT"] * np.outer(v, v)
    return H / m["ET"]


def finite_difference_hessian(f: RenewalKernel, xi=None, step: float = 1e-4) -> np.ndarray:
    d = f.dim
    xi = np.zeros(d) if xi is None else np.asarray(xi, dtype=float)

    def lam(x):
        return _solve_lambda(f, x, 0.0, NEWTON_TOL)[0]

    H = np.zeros((d, d))
    e = np.eye(d) * step
    for i in range(d):
        for j in range(d):
            H[i, j] = (lam(xi + e[i] + e[j]) - lam(xi + e[i] - e[j]) - lam(xi - e[i] + e[j])
                       + lam(xi - e[i] - e[j])) / (4 * step * step)
    return H


def tilt_kernel(f: RenewalKernel, xi, lam: float | None = None) -> RenewalKernel:
    """f_xi(x, n) = f(x, n) exp(xi . x - lam(xi) n)."""
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    if lam is None:
        lam = solve_shape_point(f, xi).lam
    vals = f.vals * np.exp(f.xs @ xi - lam * f.ns)
    return RenewalKernel(f.xs, f.ns, vals, None, f.dropped_mass)


# -- local limit theorems -----------------------------------------------------

@dataclass
class LocalCLTReport:
    n: list
    max_deviation: list
    literal_deviation: list
    period: int
    degenerate: bool


def verify_local_clt(array: RenewalArray, v, Xi, n_list: Sequence[int], radius: float = 1.0,
                     shift=None, period: int | None = None) -> LocalCLTReport:
    """Compare Q_n with the lattice Gaussian approximation.

    The prediction is period * ((2 pi n)^d det Xi)^{-1/2} exp(-q/2) with
    q = (x - n v_n) (n Xi)^{-1} (x - n v_n), where n v_n = n v - shift and
    ``period`` is the index of the spatial sublattice carrying Q_n. The
    maximum is taken over support points with |x - n v_n| <= radius sqrt(n).
    ``literal_deviation`` records |Q_n sqrt((2 pi n)^d det Xi) - 1| on the
    same points.
    """
    d = array.dim
    v = np.atleast_1d(np.asarray(v, dtype=float))
    Xi = np.atleast_2d(np.asarray(Xi, dtype=float))
    det = float(np.linalg.det(Xi))
    if det < DEGENERATE_DET:
        return LocalCLTReport(list(n_list), [np.nan] * len(n_list), [np.nan] * len(n_list), 0, True)
    if period is None:
        period = array.kernel.support_lattice()["spatial_index"] or 1
    shift = np.zeros(d) if shift is None else np.atleast_1d(np.asarray(shift, dtype=float))
    inv = np.linalg.inv(Xi)
    X = array.coords()
    devs, lit = [], []
    for n in n_list:
        Q = conditional_law(array, n).reshape(-1)
        c = n * v - shift
        dx = X - c
        sel = (np.linalg.norm(dx, axis=1) <= radius * np.sqrt(n)) & (Q > 0)
        q = np.einsum("ij,jk,ik->i", dx[sel], inv, dx[sel]) / n
        norm = np.sqrt((2 * np.pi * n) ** d * det)
        pred = period * np.exp(-0.5 * q) / norm
        devs.append(float(np.abs(Q[sel] / pred - 1).max()))
        lit.append(float(np.abs(Q[sel] * norm - 1).max()))
    return LocalCLTReport(list(n_list), devs, lit, int(period), False)


@dataclass
class LocalLDReport:
    u: np.ndarray
    target: np.ndarray
    xi: np.ndarray
    J: float
    J_dual: float | None
    predicted: float
    observed: float | None
    relative_error: float | None


def solve_gradient(f: RenewalKernel, u, xi0=None, tol: float = 1e-12, max_iter: int = 100,
                   margin: float = 0.05) -> ShapePoint:
    """Find xi with grad lambda(xi) = u by Newton steps on the Hessian."""
    u = np.atleast_1d(np.asarray(u, dtype=float))
    xi = np.zeros(f.dim) if xi0 is None else np.atleast_1d(np.asarray(xi0, dtype=float)).copy()
    lam = 0.0
    for _ in range(max_iter):
        try:
            pt = solve_shape_point(f, xi, lam, margin=margin)
        except DomainExceeded as exc:
            raise OutsideLocalDomain(str(exc)) from exc
        r = pt.grad - u
        if np.abs(r).max() <= tol:
            return pt
        if np.linalg.det(pt.hess) < DEGENERATE_DET ** 2:
            raise OutsideLocalDomain("Hessian degenerate along the Newton path")
        step = np.linalg.solve(pt.hess, r)
        shrink = 1.0
        while np.linalg.norm(shrink * step) > 1.0:
            shrink *= 0.5
        xi = xi - shrink * step
        lam = pt.lam
    raise OutsideLocalDomain(f"no xi with gradient {u} found")


def local_ld(f: RenewalKernel, array: RenewalArray | None, u, n: int,
             dual_grid: np.ndarray | None = None) -> LocalLDReport:
    """Rate J(u_n) = xi_n . u_n - lambda(xi_n) and the tilted local limit.

    The predicted point mass at x = floor(n u) is
    period * mu(0) / mu(xi_n) * (2 pi n)^{-d/2} det Xi(xi_n)^{-1/2} exp(-n J).
    """
    u = np.atleast_1d(np.asarray(u, dtype=float))
    x = np.floor(n * u + 1e-12).astype(np.int64)
    un = x / n
    pt = solve_gradient(f, un)
    J = float(pt.xi @ un - pt.lam)
    mu0 = solve_shape_point(f, np.zeros(f.dim)).mu
    period = f.support_lattice()["spatial_index"] or 1
    det = float(np.linalg.det(pt.hess))
    pred = period * mu0 / pt.mu * (2 * np.pi * n) ** (-f.dim / 2) / math.sqrt(det) * math.exp(-n * J)
    obs = rel = None
    if array is not None:
        obs = array.t_at(x, n) / array.totals[n]
        rel = abs(obs / pred - 1.0)
    J_dual = None
    if dual_grid is not None:
        lam = np.array([solve_shape_point(f, g).lam for g in np.atleast_2d(dual_grid)])
        J_dual = float(np.max(np.atleast_2d(dual_grid) @ un - lam))
    return LocalLDReport(u, un, pt.xi, J, J_dual, float(pred), obs, rel)


def characteristic_decay(f: RenewalKernel, theta, n_max: int) -> dict:
    """|phi_n(theta)| = |sum_x t(x, n) e^{i theta x}| / t(n) and its decay rate."""
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    tw = np.exp(1j * (f.xs @ theta)) * f.vals
    fn = np.zeros(n_max + 1, dtype=complex)
    np.add.at(fn, f.ns[f.ns <= n_max], tw[f.ns <= n_max])
    t = np.zeros(n_max + 1, dtype=complex)
    t[0] = 1.0
    for n in range(1, n_max + 1):
        t[n] = fn[1:n + 1] @ t[n - 1::-1][:n]
    t_real = renewal_1d(f.time_marginal(n_max), n_max)
    phi = np.abs(t) / np.where(t_real > 0, t_real, np.nan)
    ns = np.arange(n_max + 1)
    ok = (ns >= 1) & (phi > 1e-300) & np.isfinite(phi)
    slope = np.polyfit(ns[ok], np.log(phi[ok]), 1)[0] if ok.sum() >= 2 else np.nan
    return {"phi": phi, "rate": float(-slope)}


def kernel_from_probability_check(f: RenewalKernel, tol: float = 1e-9) -> None:
    if not f.is_probability(tol):
        raise KernelMismatch(f"kernel mass {f.mass} is not 1")
