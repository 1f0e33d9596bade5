"""Quenched renewal structure, the fluctuation ledger and disorder diagnostics."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import integrate, stats
from scipy.optimize import brentq

from . import _kernels
from .decomposition import SurchargeGeometry, cone_tables
from .environment import PotentialLaw, sample_environment, site_uniforms
from .errors import (ConeRestrictionInfeasible, EnvironmentCoverage,
                     InsufficientSeeds, KernelMismatch, WindowViolation)
from .lattice import StepDistribution
from .partition import (AnnealedTable, PolymerModel, _shift_slices,
                        quenched_partition)
from .renewal import renewal_1d
from .seeds import derive_seed, pmap

KERNEL_TOL = 1e-9


# -- catalogue of irreducible pieces -------------------------------------------

@dataclass
class PieceCatalogue:
    """Every irreducible piece shape of length at most M, grouped by
    (end point, length), with the annealed weight of each group."""

    steps: StepDistribution
    law: PotentialLaw
    M: int
    vertices: np.ndarray
    lengths: np.ndarray
    log_p: np.ndarray
    group: np.ndarray
    ends: np.ndarray
    group_length: np.ndarray
    annealed: np.ndarray

    @property
    def n_groups(self) -> int:
        return len(self.group_length)

    def tilt(self, h, lam: float) -> np.ndarray:
        return np.exp(self.ends @ np.asarray(h, dtype=float) - lam * self.group_length)

    def annealed_by_length(self, h, lam: float) -> np.ndarray:
        out = np.zeros(self.M + 1)
        np.add.at(out, self.group_length, self.annealed * self.tilt(h, lam))
        return out

    def truncated_lambda(self, h) -> float:
        """Killing rate making the truncated annealed kernel a probability."""
        base = self.annealed * np.exp(self.ends @ np.asarray(h, dtype=float))

        def excess(lam):
            return float(base @ np.exp(-lam * self.group_length)) - 1.0
        lo, hi = -1.0, 1.0
        while excess(lo) < 0:
            lo *= 2
        while excess(hi) > 0:
            hi *= 2
        return float(brentq(excess, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps))

    def velocity(self, h, lam: float) -> np.ndarray:
        w = self.annealed * self.tilt(h, lam)
        return (w @ self.ends) / (w @ self.group_length)

    def sites_from(self, start) -> set:
        start = np.asarray(start, dtype=np.int64)
        out = set()
        for s, m in enumerate(self.lengths):
            out.update(map(tuple, self.vertices[s, :m] + start))
        return out


def piece_catalogue(geom: SurchargeGeometry, steps: StepDistribution, law: PotentialLaw,
                    M: int) -> PieceCatalogue:
    tables = cone_tables(geom, steps, law, M, collect_cap=1024)
    if tables.piece_count == 0:
        raise ConeRestrictionInfeasible("no irreducible piece fits in the cone")
    d = steps.dim
    S = tables.piece_count
    verts = np.zeros((S, M, d), dtype=np.int64)
    log_p = np.zeros(S)
    logs = np.log(steps.probs)
    for s in range(S):
        m = tables.piece_lengths[s]
        idx = tables.pieces[s, :m]
        verts[s, :m] = np.cumsum(steps.steps[idx], axis=0)
        log_p[s] = logs[idx].sum()
    ends = verts[np.arange(S), tables.piece_lengths - 1]
    keys = np.column_stack([ends, tables.piece_lengths])
    uniq, group = np.unique(keys, axis=0, return_inverse=True)
    g_ends, g_len = uniq[:, :d], uniq[:, d]
    idx = _kernels.flat_index(g_ends, tables.radius)
    annealed = tables.f[g_len, idx]
    return PieceCatalogue(steps, law, M, verts, tables.piece_lengths.astype(np.int64), log_p,
                          group.reshape(-1).astype(np.int64), g_ends, g_len.astype(np.int64), annealed)


# -- basic quenched tables -----------------------------------------------------

def env_radius_for(cat: PieceCatalogue, n_max: int) -> int:
    return (n_max + cat.M) * cat.steps.range


def env_values(law: PotentialLaw, d: int, radius: int, seed: int) -> np.ndarray:
    return sample_environment(law, (-radius,) * d, (radius,) * d, seed).values


class BasicQuenchedTable:
    """Quenched piece weights f^w_y from every start y and the quenched
    renewal array t^w(x, n) they generate, for one environment.

    ``values`` are site potentials on the centred box of radius ``env_radius``.
    Pieces longer than the catalogue cap M are absent, so t^w(x, n) is exact
    for n <= M and a truncation beyond.
    """

    def __init__(self, cat: PieceCatalogue, values: np.ndarray, env_radius: int, h,
                 lam: float, n_max: int, seed: int | None = None):
        d, R = cat.steps.dim, cat.steps.range
        if env_radius < env_radius_for(cat, n_max):
            raise EnvironmentCoverage(f"environment radius must be at least {env_radius_for(cat, n_max)}")
        self.cat, self.h, self.lam, self.n_max, self.seed = cat, np.asarray(h, dtype=float), float(lam), n_max, seed
        self.radius = max(n_max * R, 1)
        side, strides = _kernels.grid_layout(d, self.radius)
        self.points = _kernels.unflatten(np.arange(side ** d), d, self.radius)
        self.origin = int(self.radius * strides.sum())
        _, env_strides = _kernels.grid_layout(d, env_radius)
        w = np.exp(cat.law.log_weight(values)).ravel(order="F")
        starts = (self.points + env_radius) @ env_strides
        offsets = cat.vertices @ env_strides
        raw = _kernels.gather_piece_weights(offsets, cat.lengths, cat.log_p, cat.group,
                                            cat.n_groups, w, starts)
        self.F = raw * cat.tilt(self.h, self.lam)[:, None]
        z = cat.ends @ strides
        self.t = _kernels.random_renewal(self.F, cat.group_length, z, n_max, self.origin)

    def t_total(self) -> np.ndarray:
        return self.t.sum(axis=1)

    def piece_mass(self) -> np.ndarray:
        """f^w_y summed over end points and lengths, per start y."""
        return self.F.sum(axis=0)

    def piece_mass_by_length(self) -> np.ndarray:
        out = np.zeros((self.cat.M + 1, self.F.shape[1]))
        np.add.at(out, self.cat.group_length, self.F)
        return out

    def index(self, x) -> int:
        return int(_kernels.flat_index(np.asarray(x, dtype=np.int64).reshape(1, -1), self.radius)[0])


def basic_quenched(cat: PieceCatalogue, h, lam: float, n_max: int, seed: int,
                   law: PotentialLaw | None = None) -> BasicQuenchedTable:
    """Tables for the environment hashed from ``seed`` (law defaults to the catalogue's)."""
    law = cat.law if law is None else law
    r = env_radius_for(cat, n_max)
    vals = env_values(law, cat.steps.dim, r, seed)
    return BasicQuenchedTable(cat, vals, r, h, lam, n_max, seed)


def diamond_partition(geom: SurchargeGeometry, steps: StepDistribution, law: PotentialLaw,
                      values: np.ndarray, env_radius: int, h, lam: float, n_max: int) -> np.ndarray:
    """t^w(x, n) by forward recursion over paths confined to each diamond D(0, x).

    Returns an array over the box of radius n_max * range in the same flat
    layout as :class:`BasicQuenchedTable`.
    """
    d, R = steps.dim, steps.range
    radius = max(n_max * R, 1)
    side, _ = _kernels.grid_layout(d, radius)
    pts = _kernels.unflatten(np.arange(side ** d), d, radius)
    shape = (side,) * d
    lo = env_radius - radius
    sub = values[tuple(slice(lo, lo + side) for _ in range(d))]
    w = np.exp(law.log_weight(sub))
    slices = [_shift_slices(s, radius) for s in steps.steps]
    h = np.asarray(h, dtype=float)
    out = np.zeros((n_max + 1, side ** d))
    origin = tuple([radius] * d)
    out[0, int(_kernels.flat_index(np.zeros((1, d), dtype=np.int64), radius)[0])] = 1.0
    in_cone = geom.in_cone(pts)
    nonzero = np.any(pts != 0, axis=1)
    for j in np.flatnonzero(in_cone & nonzero):
        x = pts[j]
        if np.abs(x).max() > radius:
            continue
        allowed = geom.in_diamond(pts, np.zeros(d), x) & nonzero & np.any(pts != x, axis=1)
        A = allowed.reshape(shape, order="F")
        xi = tuple(x + radius)
        W = np.zeros(shape)
        W[origin] = 1.0
        tilt = np.exp(h @ x)
        for k in range(1, n_max + 1):
            S = np.zeros(shape)
            for p, (src, dst) in zip(steps.probs, slices):
                S[dst] += p * W[src]
            out[k, j] = S[xi] * w[xi] * tilt * np.exp(-lam * k)
            W = S * w * A
            if not W.any():
                break
    return out


# -- fluctuation ledger --------------------------------------------------------

@dataclass
class FluctuationLedger:
    n: np.ndarray
    quenched: np.ndarray
    annealed: np.ndarray
    mu: float
    Y: np.ndarray
    s: np.ndarray
    eps1: np.ndarray
    eps2: np.ndarray
    rhs: np.ndarray
    residual: np.ndarray
    telescoping_gap: float

    def rows(self) -> list[dict]:
        return [{"n": int(n), "t_quenched": float(a), "t_annealed": float(b), "Y": float(y),
                 "s": float(s), "eps1": float(e1), "eps2": float(e2), "residual": float(r)}
                for n, a, b, y, s, e1, e2, r in zip(self.n, self.quenched, self.annealed, self.Y,
                                                    self.s, self.eps1, self.eps2, self.residual)]


def ledger_coefficients(t_annealed: np.ndarray, mu: float, n: int, M: int) -> np.ndarray:
    """a(l, m) with eps_n = sum a(l, m) D(l, m), l <= n, 1 <= m <= M."""
    a = np.zeros((n + 1, M + 1))
    for l in range(n + 1):
        for m in range(1, M + 1):
            a[l, m] = t_annealed[n - l - m] - 1 / mu if l + m <= n else -1 / mu
    return a


def fluctuation_ledger(table: BasicQuenchedTable) -> FluctuationLedger:
    """Split t^w(n) into s^w(n)/mu, the correction terms and t(n) - 1/mu."""
    cat, n_max = table.cat, table.n_max
    f = cat.annealed_by_length(table.h, table.lam)
    if abs(f.sum() - 1.0) > KERNEL_TOL:
        raise KernelMismatch(f"truncated annealed kernel has mass {f.sum():.12f}, not 1")
    mu = float(np.arange(cat.M + 1) @ f)
    ta = renewal_1d(f, n_max)
    fq = table.piece_mass_by_length()
    D = table.t @ (fq - f[:, None]).T
    Y = D.sum(axis=1)
    tq = table.t_total()
    s = 1.0 + np.cumsum(Y)
    eps1, eps2, rhs = (np.zeros(n_max + 1) for _ in range(3))
    ls, ms = np.meshgrid(np.arange(n_max + 1), np.arange(cat.M + 1), indexing="ij")
    for n in range(n_max + 1):
        a = ledger_coefficients(ta, mu, n, cat.M)
        sub = D[:n + 1]
        late = (ls[:n + 1] + ms[:n + 1] > n)
        eps1[n] = float(np.sum(np.where(late, 0.0, a * sub)))
        eps2[n] = float(np.sum(np.where(late, sub, 0.0))) / mu
        rhs[n] = s[n] / mu + eps1[n] - eps2[n] + ta[n] - 1 / mu
    resid = np.abs(tq - rhs) / np.maximum(np.abs(tq), np.finfo(float).tiny)
    tele = float((table.t * table.piece_mass()[None, :]).sum() - tq[1:].sum())
    return FluctuationLedger(np.arange(n_max + 1), tq, ta, mu, Y, s, eps1, eps2, rhs, resid,
                       abs(tele - s[-1]))


# -- mixingale diagnostics -----------------------------------------------------

@dataclass
class MixingaleReport:
    ell: int
    lags: np.ndarray
    second_moment: np.ndarray
    stderr: np.ndarray
    fitted_exponent: float
    seeds: int
    resamples: int

    def to_dict(self) -> dict:
        return {"ell": self.ell, "lags": self.lags.tolist(), "second_moment": self.second_moment.tolist(),
                "stderr": self.stderr.tolist(), "fitted_exponent": self.fitted_exponent,
                "seeds": self.seeds, "resamples": self.resamples}


def _y_value(cat, vals, r, h, lam, ell) -> float:
    tab = BasicQuenchedTable(cat, vals, r, h, lam, ell)
    return float(tab.t[ell] @ (tab.piece_mass() - 1.0))


def _mixingale_job(args) -> list[float]:
    cat, h, lam, ell, lags, resamples, base_seed, i = args
    d = cat.steps.dim
    r = env_radius_for(cat, ell)
    side = 2 * r + 1
    grid = np.indices((side,) * d).reshape(d, -1).T - r
    v = cat.velocity(h, lam)
    speed = float(np.linalg.norm(v))
    proj = (grid @ (v / speed)).reshape((side,) * d)
    base = env_values(cat.law, d, r, derive_seed(base_seed, i))
    out = []
    for k in lags:
        keep = proj <= (ell - k) * speed
        ys = []
        for j in range(resamples):
            other = env_values(cat.law, d, r, derive_seed(base_seed, i, k, j + 1))
            ys.append(_y_value(cat, np.where(keep, base, other), r, h, lam, ell))
        ys = np.array(ys)
        out.append(float(ys.mean() ** 2 - ys.var(ddof=1) / resamples))
    return out


def mixingale_diagnostics(cat: PieceCatalogue, h, lam: float, ell: int, lags: Sequence[int],
                          seeds: int, resamples: int = 64, base_seed: int = 0,
                          workers: int = 1) -> MixingaleReport:
    """Conditional second moments E[E(Y_ell | A_(ell-k))^2] by resampling the
    environment beyond the half-space {x . v <= (ell - k)|v|}."""
    if seeds < 2 or resamples < 2:
        raise InsufficientSeeds("need at least two seeds and two resamples")
    lags = np.asarray(lags, dtype=np.int64)
    jobs = [(cat, np.asarray(h, dtype=float), lam, ell, lags, resamples, base_seed, i) for i in range(seeds)]
    vals = np.array(pmap(_mixingale_job, jobs, workers))
    m = vals.mean(axis=0)
    se = vals.std(axis=0, ddof=1) / np.sqrt(seeds)
    ok = m > 0
    slope = float(np.polyfit(np.log1p(lags[ok]), np.log(m[ok]), 1)[0]) if ok.sum() >= 2 else np.nan
    return MixingaleReport(ell, lags, m, se, slope, seeds, resamples)


# -- tilted environments -------------------------------------------------------

def psi(v) -> np.ndarray:
    """min(v, 1), equal to 1 on traps."""
    return np.minimum(np.asarray(v, dtype=float), 1.0)


def _expect(law: PotentialLaw, fn) -> float:
    if law.is_discrete:
        return float(sum(q * fn(v) for v, q in law.support_atoms()))
    r = law.rate
    val, _ = integrate.quad(lambda v: fn(v) * r * np.exp(-r * v), 0.0, 1.0, epsabs=1e-14, epsrel=1e-13)
    tail, _ = integrate.quad(lambda v: fn(v) * r * np.exp(-r * v), 1.0, np.inf, epsabs=1e-14, epsrel=1e-13)
    return float(val + tail)


def _weight(law: PotentialLaw, ell: int):
    def fn(v):
        if np.isinf(v):
            return 0.0 if ell > 0 else 1.0
        return float(np.exp(-law.beta * ell * v))
    return fn


@dataclass
class TiltedEnvironment:
    """The law Q_delta with density exp(delta psi(V) - g(delta)) against Q."""

    law: PotentialLaw
    delta: float

    @property
    def g(self) -> float:
        return float(np.log(_expect(self.law, lambda v: np.exp(self.delta * float(psi(v))))))

    def density(self, v) -> np.ndarray:
        return np.exp(self.delta * psi(v) - self.g)

    def phi(self, ell: int) -> float:
        """Annealed potential under the tilted law."""
        fn = _weight(self.law, ell)
        e = _expect(self.law, lambda v: np.exp(self.delta * float(psi(v)) - self.g) * fn(v))
        return float(-np.log(e)) if e > 0 else np.inf

    def log_rn_moment(self, power: float) -> float:
        """log E_Q[(dQ/dQ_delta)^power] for one site."""
        g = self.g
        return float(np.log(_expect(self.law, lambda v: np.exp(power * (g - self.delta * float(psi(v)))))))

    def quantile(self, u: np.ndarray) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        if self.law.is_discrete:
            atoms = [(v, q * np.exp(self.delta * float(psi(v)))) for v, q in self.law.atoms]
            return PotentialLaw.discrete(atoms, beta=self.law.beta).quantile(u)
        # mixture of an exponential of rate r - delta cut at 1 and 1 + Exp(r)
        r, c = self.law.rate, self.law.rate - self.delta
        head = r * (1 - np.exp(-c)) / c if c != 0 else r
        a = head / (head + np.exp(self.delta - r))
        frac = np.minimum(u / a, 1.0)
        low = -np.log1p(-frac * (1 - np.exp(-c))) / c if c != 0 else frac
        high = 1.0 - np.log1p(-np.clip((u - a) / (1 - a), 0.0, 1.0)) / r
        return np.where(u < a, low, high)


def tilted_env_tools(law: PotentialLaw, delta: float, fd_step: float = 1e-4,
                     ell_max: int = 5) -> dict:
    """g(delta), phi under the tilt and finite-difference derivative checks."""
    tilt = TiltedEnvironment(law, delta)
    dphi = []
    for ell in range(1, ell_max + 1):
        up = TiltedEnvironment(law, fd_step).phi(ell)
        down = TiltedEnvironment(law, -fd_step).phi(ell)
        dphi.append((up - down) / (2 * fd_step))
    p = 0.5

    def lm(dl):
        return TiltedEnvironment(law, dl).log_rn_moment(p / (1 - p))
    first = (lm(fd_step) - lm(-fd_step)) / (2 * fd_step)
    return {"g": tilt.g, "phi": [tilt.phi(l) for l in range(ell_max + 1)],
            "dphi_ddelta_at_0": dphi, "log_moment_first_derivative": first}


# -- fractional moments --------------------------------------------------------

def delta_window(N: int, epsilon: float = 0.01) -> tuple[float, float]:
    return float(np.log(N) / N), float(N ** (-0.5 - epsilon))


def default_delta(N: int) -> float:
    return float(N ** -0.55)


@dataclass
class FractionalMomentReport:
    N: int
    alpha: float
    per_step: float
    per_step_upper: float
    mean_moment: float
    stderr: float
    annealed_value: float
    seeds: int
    delta: float | None = None
    tilted_bound: float | None = None
    tube_sites: int | None = None

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def _compose(cat, vals, r, h, lam, N):
    """Sum over N-piece concatenations from the origin, by end point."""
    d, R = cat.steps.dim, cat.steps.range
    reach = max(N * cat.M * R, 1)
    side, strides = _kernels.grid_layout(d, reach)
    _, env_strides = _kernels.grid_layout(d, r)
    w = np.exp(cat.law.log_weight(vals)).ravel(order="F")
    pts = _kernels.unflatten(np.arange(side ** d), d, reach)
    offsets = cat.vertices @ env_strides
    tilt = cat.tilt(h, lam)
    z = cat.ends @ strides
    cur = np.zeros(side ** d)
    cur[int(reach * strides.sum())] = 1.0
    for _ in range(N):
        nz = np.flatnonzero(cur)
        starts = (pts[nz] + r) @ env_strides
        F = _kernels.gather_piece_weights(offsets, cat.lengths, cat.log_p, cat.group,
                                          cat.n_groups, w, starts) * tilt[:, None]
        nxt = np.zeros_like(cur)
        for g in range(cat.n_groups):
            np.add.at(nxt, nz + z[g], cur[nz] * F[g])
        cur = nxt
    return cur, pts


def tube_mask(cat: PieceCatalogue, h, lam: float, N: int, radius: int, width: float) -> np.ndarray:
    """Sites within width * sqrt(N) of the segment from 0 to N times the mean piece end point."""
    d = cat.steps.dim
    side = 2 * radius + 1
    grid = np.indices((side,) * d).reshape(d, -1).T - radius
    w = cat.annealed * cat.tilt(h, lam)
    mean_end = (w @ cat.ends) / w.sum()
    length = float(np.linalg.norm(mean_end)) * N
    u = mean_end / np.linalg.norm(mean_end)
    along = grid @ u
    perp = np.linalg.norm(grid - np.outer(along, u), axis=1)
    inside = (along >= 0) & (along <= length) & (perp <= width * np.sqrt(N))
    return inside.reshape((side,) * d, order="C")


def _fm_job(args) -> tuple[float, float]:
    cat, h, lam, N, alpha, base_seed, i, delta, width = args
    d = cat.steps.dim
    r = N * cat.M * cat.steps.range
    seed = derive_seed(base_seed, i)
    side = 2 * r + 1
    grid = np.indices((side,) * d).reshape(d, -1).T - r
    u = site_uniforms(seed, grid).reshape((side,) * d)
    vals = cat.law.quantile(u)
    cur, _ = _compose(cat, vals, r, h, lam, N)
    plain = float(np.sum(cur ** alpha))
    tilted = np.nan
    if delta is not None:
        tube = tube_mask(cat, h, lam, N, r, width)
        tv = np.where(tube, TiltedEnvironment(cat.law, delta).quantile(u), vals)
        tilted = float(_compose(cat, tv, r, h, lam, N)[0].sum())
    return plain, tilted


def fractional_moment_experiment(cat: PieceCatalogue, h, lam: float, N: int, alpha: float,
                                 seeds: int, base_seed: int = 0, workers: int = 1,
                                 delta: float | None = None, epsilon: float = 0.01,
                                 tube_width: float = 1.0, confidence: float = 0.95) -> FractionalMomentReport:
    """Monte Carlo of E sum_x (r^w_(x,N))^alpha over N-piece concatenations.

    With ``delta`` the tilted bound (E_delta sum_x r^w)^alpha times the
    Radon-Nikodym moment over the tube is reported as well.
    """
    if not 0 < alpha <= 1:
        raise ValueError("alpha must lie in (0, 1]")
    if seeds < 2:
        raise InsufficientSeeds("need at least two seeds")
    if delta is not None:
        lo, hi = delta_window(N, epsilon)
        if not lo < delta < hi:
            raise WindowViolation(f"delta = {delta:.4g} outside ({lo:.4g}, {hi:.4g})")
    h = np.asarray(h, dtype=float)
    jobs = [(cat, h, lam, N, alpha, base_seed, i, delta, tube_width) for i in range(seeds)]
    res = np.array(pmap(_fm_job, jobs, workers))
    vals = res[:, 0]
    mean = float(vals.mean())
    se = float(vals.std(ddof=1) / np.sqrt(seeds))
    z = stats.norm.ppf(confidence)
    upper = mean + z * se
    annealed = float(cat.annealed_by_length(h, lam).sum() ** N)
    rep = FractionalMomentReport(N, alpha, mean ** (1 / N) if mean > 0 else 0.0,
                                 upper ** (1 / N) if upper > 0 else 0.0, mean, se, annealed, seeds)
    if delta is not None and alpha < 1:
        r = N * cat.M * cat.steps.range
        n_tube = int(tube_mask(cat, h, lam, N, r, tube_width).sum())
        tilt = TiltedEnvironment(cat.law, delta)
        log_rn = n_tube * (1 - alpha) * tilt.log_rn_moment(alpha / (1 - alpha))
        e_tilted = float(np.mean(res[:, 1]))
        rep.delta, rep.tube_sites = delta, n_tube
        rep.tilted_bound = float(np.exp(alpha * np.log(e_tilted) + log_rn)) if e_tilted > 0 else 0.0
    elif delta is not None:
        rep.delta = delta
    return rep


# -- strong disorder -----------------------------------------------------------

@dataclass
class StrongDisorderReport:
    n: list
    median: list
    quantiles: list
    median_upper: list
    sign_p_value: list
    mean_ratio: list
    mean_ratio_stderr: list
    log_ratios: np.ndarray = field(repr=False)

    def to_dict(self) -> dict:
        return {"n": self.n, "median": self.median, "quantiles": self.quantiles,
                "median_upper_99": self.median_upper, "sign_p_value": self.sign_p_value,
                "mean_ratio": self.mean_ratio, "mean_ratio_stderr": self.mean_ratio_stderr}


def median_upper_bound(x: np.ndarray, confidence: float = 0.99) -> float:
    """Distribution-free one-sided upper confidence bound for the median."""
    xs = np.sort(x)
    n = len(xs)
    k = int(stats.binom.ppf(confidence, n, 0.5))
    return float(xs[min(k, n - 1)])


def _strong_job(args) -> list[float]:
    model, ladder, base_seed, i = args
    r = max(ladder) * model.steps.range
    env = sample_environment(model.law, (-r,) * model.dim, (r,) * model.dim, derive_seed(base_seed, i))
    return [quenched_partition(model, env, n).log_z for n in ladder]


def strong_disorder_ratio(model: PolymerModel, ladder: Sequence[int], seeds: int,
                          base_seed: int = 0, workers: int = 1,
                          table: AnnealedTable | None = None) -> StrongDisorderReport:
    """Distribution over environments of (1/n) log(Z^w_n / Z_n) at drift h."""
    if seeds < 2:
        raise InsufficientSeeds("need at least two seeds")
    ladder = [int(n) for n in ladder]
    if table is None or table.n_max < max(ladder):
        table = AnnealedTable(model.steps, model.law, max(ladder))
    log_ann = table.log_z(model.drift)
    jobs = [(model, ladder, base_seed, i) for i in range(seeds)]
    lq = np.array(pmap(_strong_job, jobs, workers))
    ratios = (lq - log_ann[ladder][None, :]) / np.array(ladder)[None, :]
    rep = StrongDisorderReport([], [], [], [], [], [], [], ratios)
    for j, n in enumerate(ladder):
        x = ratios[:, j]
        neg = int(np.sum(x < 0))
        rep.n.append(n)
        rep.median.append(float(np.median(x)))
        rep.quantiles.append([float(q) for q in np.quantile(x, [0.05, 0.25, 0.5, 0.75, 0.95])])
        rep.median_upper.append(median_upper_bound(x))
        rep.sign_p_value.append(float(stats.binom.sf(neg - 1, seeds, 0.5)))
        w = np.exp(lq[:, j] - log_ann[n])
        rep.mean_ratio.append(float(w.mean()))
        rep.mean_ratio_stderr.append(float(w.std(ddof=1) / np.sqrt(seeds)))
    return rep


# -- locality ------------------------------------------------------------------

def block_covariance(cat: PieceCatalogue, h, lam: float, x, y, seeds: int,
                     base_seed: int = 0) -> dict:
    """Sample covariance of the quenched piece masses started at x and at y."""
    if seeds < 2:
        raise InsufficientSeeds("need at least two seeds")
    x, y = np.asarray(x, dtype=np.int64), np.asarray(y, dtype=np.int64)
    disjoint = not (cat.sites_from(x) & cat.sites_from(y))
    d, R = cat.steps.dim, cat.steps.range
    r = int(max(np.abs(x).max(), np.abs(y).max())) + cat.M * R
    _, strides = _kernels.grid_layout(d, r)
    offsets = cat.vertices @ strides
    starts = (np.vstack([x, y]) + r) @ strides
    tilt = cat.tilt(h, lam)
    a = np.empty((seeds, 2))
    for i in range(seeds):
        vals = env_values(cat.law, d, r, derive_seed(base_seed, i))
        w = np.exp(cat.law.log_weight(vals)).ravel(order="F")
        F = _kernels.gather_piece_weights(offsets, cat.lengths, cat.log_p, cat.group,
                                          cat.n_groups, w, starts) * tilt[:, None]
        a[i] = F.sum(axis=0)
    c = a - a.mean(axis=0)
    prod = c[:, 0] * c[:, 1]
    cov = float(prod.sum() / (seeds - 1))
    se = float(prod.std(ddof=1) / np.sqrt(seeds))
    return {"covariance": cov, "stderr": se, "z": cov / se if se > 0 else 0.0,
            "disjoint": disjoint, "means": a.mean(axis=0).tolist()}
