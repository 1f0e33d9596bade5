"""Quenched and annealed partition functions, two-point functions and free energies."""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np
from scipy.sparse import lil_matrix
from scipy.sparse.linalg import eigs
from scipy.special import logsumexp

from . import _kernels
from .environment import (EnvironmentField, PotentialLaw, phi_table,
                          sample_environment)
from .errors import (DegenerateWeights, EnumerationCapExceeded,
                     EnvironmentCoverage, LambdaNonpositive)
from .lattice import (ENUMERATION_CAP, LatticePath, StepDistribution,
                      enumerate_path_array, enumerate_paths, local_time_profile)
from .seeds import derive_seed, pmap

DFS_NODE_CAP = 4 * 10**9


@dataclass(frozen=True)
class PolymerModel:
    """Walk, potential law (carrying beta), drift and killing rate."""

    steps: StepDistribution
    law: PotentialLaw
    h: tuple = None
    lam: float = 0.0

    def __post_init__(self):
        h = (0.0,) * self.steps.dim if self.h is None else tuple(float(c) for c in np.atleast_1d(self.h))
        if len(h) != self.steps.dim:
            raise ValueError("drift dimension does not match the walk")
        if not all(np.isfinite(h)):
            raise ValueError("drift must be finite")
        if self.lam < 0:
            raise ValueError("killing rate must be nonnegative")
        object.__setattr__(self, "h", h)

    @property
    def dim(self) -> int:
        return self.steps.dim

    @property
    def beta(self) -> float:
        return self.law.beta

    @property
    def drift(self) -> np.ndarray:
        return np.array(self.h)

    def replace(self, **kw) -> "PolymerModel":
        args = dict(steps=self.steps, law=self.law, h=self.h, lam=self.lam)
        args.update(kw)
        return PolymerModel(**args)


# -- quenched ----------------------------------------------------------------

@dataclass
class QuenchedResult:
    log_z: float
    radius: int = 0
    log_table: np.ndarray | None = None

    def log_endpoint(self, x) -> float:
        idx = tuple(np.asarray(x) + self.radius)
        return float(self.log_table[idx])


def _shift_slices(s, radius):
    src, dst = [], []
    for c in s:
        if c >= 0:
            src.append(slice(0, 2 * radius + 1 - c))
            dst.append(slice(c, 2 * radius + 1))
        else:
            src.append(slice(-c, 2 * radius + 1))
            dst.append(slice(0, 2 * radius + 1 + c))
    return tuple(src), tuple(dst)


def quenched_partition(model: PolymerModel, env: EnvironmentField, n: int,
                       table: bool = False) -> QuenchedResult:
    """Exact forward recursion over (site, time) for the quenched weight.

    The table is renormalised after every step and the scale is carried in
    the log domain, so neither traps nor long times underflow.
    """
    d, R = model.dim, model.steps.range
    radius = n * R
    if n == 0:
        tab = None
        if table:
            tab = np.full((1,) * d, 0.0)
        return QuenchedResult(0.0, 0, tab)
    lo, hi = (-radius,) * d, (radius,) * d
    if not env.covers(lo, hi):
        raise EnvironmentCoverage(f"environment must cover the box of radius {radius}")
    expw = np.exp(model.law.log_weight(env.box(lo, hi)))
    h = model.drift
    coef = model.steps.probs * np.exp(model.steps.steps @ h)
    slices = [_shift_slices(s, radius) for s in model.steps.steps]
    cur = np.zeros((2 * radius + 1,) * d)
    cur[(radius,) * d] = 1.0
    log_scale = 0.0
    for _ in range(n):
        new = np.zeros_like(cur)
        for c, (src, dst) in zip(coef, slices):
            new[dst] += c * cur[src]
        new *= expw
        m = new.max()
        if m == 0.0:
            tab = np.full(cur.shape, -np.inf) if table else None
            return QuenchedResult(-np.inf, radius, tab)
        cur = new / m
        log_scale += np.log(m)
    log_z = log_scale + float(np.log(cur.sum()))
    tab = None
    if table:
        with np.errstate(divide="ignore"):
            tab = np.log(cur) + log_scale
    return QuenchedResult(log_z, radius, tab)


def quenched_partition_bruteforce(model: PolymerModel, env: EnvironmentField, n: int,
                                  cap: int = ENUMERATION_CAP) -> float:
    """Log partition function by summing every path; an oracle for small n."""
    verts, probs = enumerate_path_array(model.steps, n, cap)
    if n == 0:
        return 0.0
    flat = verts[:, 1:, :].reshape(-1, model.dim)
    logw = model.law.log_weight(env.value_at(flat)).reshape(verts.shape[0], n).sum(axis=1)
    logw = logw + np.log(probs) + verts[:, -1, :] @ model.drift
    return float(logsumexp(logw))


# -- annealed ----------------------------------------------------------------

def annealed_path_log_weight(model: PolymerModel, path: LatticePath) -> float:
    """log of exp(h.X) exp(-Phi) P for one path, via its local times."""
    phi = phi_table(model.law, path.n + 1)
    lt = local_time_profile(path)
    penalty = sum(phi[c] for c in lt.values())
    return float(path.displacement @ model.drift - penalty + path.log_probability(model.steps))


@dataclass
class AnnealedResult:
    log_z: float
    table: dict | None = None


def annealed_partition_exact(model: PolymerModel, n: int, table: bool = False,
                             cap: int = ENUMERATION_CAP) -> AnnealedResult:
    """Sum over all n-step paths of exp(h.X - Phi) P, path by path."""
    phi = phi_table(model.law, n + 1)
    h = model.drift
    logs, ends = [], []
    for path, prob in enumerate_paths(model.steps, n, cap):
        lt = local_time_profile(path)
        pen = sum(phi[c] for c in lt.values())
        if not np.isfinite(pen) or prob == 0.0:
            continue
        logs.append(float(path.displacement @ h) - pen + np.log(prob))
        ends.append(tuple(int(c) for c in path.end))
    if not logs:
        return AnnealedResult(-np.inf, {} if table else None)
    logs = np.array(logs)
    tab = None
    if table:
        tab = {}
        for e, lw in zip(ends, logs):
            tab.setdefault(e, []).append(lw)
        tab = {e: float(logsumexp(v)) for e, v in tab.items()}
    return AnnealedResult(float(logsumexp(logs)), tab)


def dfs_node_count(steps: StepDistribution, n_max: int) -> int:
    k = steps.size
    return sum(k ** n for n in range(1, n_max + 1))


class AnnealedTable:
    """End-point tables of the undrifted annealed weight for n = 0..n_max.

    ``all[n, i]`` sums exp(-Phi) P over n-step paths ending at ``points[i]``;
    ``first[n, i]`` keeps only paths that visit their end point once. Drifted
    quantities follow by reweighting with exp(g . x).
    """

    def __init__(self, steps: StepDistribution, law: PotentialLaw, n_max: int,
                 node_cap: int = DFS_NODE_CAP):
        if dfs_node_count(steps, n_max) > node_cap:
            raise EnumerationCapExceeded(
                f"depth-first enumeration to n={n_max} exceeds {node_cap} nodes")
        self.steps, self.law, self.n_max = steps, law, n_max
        d, R = steps.dim, steps.range
        self.radius = max(n_max * R, 1)
        side, strides = _kernels.grid_layout(d, self.radius)
        self.n_cells = side ** d
        self.points = _kernels.unflatten(np.arange(self.n_cells), d, self.radius)
        self.origin = int(self.radius * strides.sum())
        inc = np.diff(phi_table(law, n_max + 1))
        inc = np.where(np.isnan(inc), np.inf, inc)
        a, f, self.nodes = _kernels.annealed_endpoint_dfs(
            steps.steps @ strides, steps.probs.astype(float), inc, n_max, self.n_cells, self.origin)
        self.all, self.first = a, f

    def index(self, x) -> int:
        return int(_kernels.flat_index(np.asarray(x, dtype=np.int64).reshape(1, -1), self.radius)[0])

    def tilt(self, g) -> np.ndarray:
        return np.exp(self.points @ np.asarray(g, dtype=float))

    def log_z(self, g=None) -> np.ndarray:
        """log Z_n(g) for n = 0..n_max."""
        g = np.zeros(self.steps.dim) if g is None else np.asarray(g, dtype=float)
        with np.errstate(divide="ignore"):
            return np.log(self.all @ self.tilt(g))

    def log_zhat(self, x) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return np.log(self.first[:, self.index(x)])

    def endpoint(self, x) -> np.ndarray:
        return self.all[:, self.index(x)]

    def lambda_n(self, g=None) -> np.ndarray:
        lz = self.log_z(g)
        out = np.full(self.n_max + 1, np.nan)
        out[1:] = lz[1:] / np.arange(1, self.n_max + 1)
        return out

    def lambda_estimate(self, g=None) -> float:
        """Extrapolated free energy from two-step increments of log Z_n."""
        return extrapolate_increments(self.log_z(g))

    def mean_displacement(self, g, n: int) -> np.ndarray:
        w = self.all[n] * self.tilt(g)
        return (w @ self.points) / w.sum()


def extrapolate_increments(log_z: np.ndarray) -> float:
    """Aitken extrapolation of a_n = (log Z_n - log Z_{n-2}) / 2.

    Two-step increments average out period-two oscillations; the Aitken step
    removes the leading geometric correction and is skipped when the three
    increments are not in a geometric pattern.
    """
    lz = np.asarray(log_z, dtype=float)
    n = len(lz) - 1
    if n < 2:
        return float(lz[-1] / max(n, 1))
    a = [(lz[m] - lz[m - 2]) / 2 for m in range(n, 1, -2)][:3][::-1]
    if len(a) < 3:
        return float(a[-1])
    a0, a1, a2 = a
    den = a2 - 2 * a1 + a0
    r = (a2 - a1) / (a1 - a0) if a1 != a0 else np.inf
    if den == 0.0 or not (0.0 < r < 0.95):
        return float(a2)
    return float(a2 - (a2 - a1) ** 2 / den)


# -- Monte Carlo ---------------------------------------------------------------

@dataclass
class MCEstimate:
    mean: float
    stderr: float
    ess: float
    chains: int
    resampled: bool = False

    @property
    def log_mean(self) -> float:
        return float(np.log(self.mean)) if self.mean > 0 else -np.inf


def _sis_group(model: PolymerModel, n: int, chains: int, rng: np.random.Generator,
               resample: bool, threshold: float) -> tuple[float, np.ndarray]:
    d = model.dim
    phi = phi_table(model.law, n + 1)
    inc = np.diff(phi)
    hist = np.zeros((chains, n + 1, d), dtype=np.int64)
    logw = np.zeros(chains)
    log_norm = 0.0
    h = model.drift
    for k in range(1, n + 1):
        idx = rng.choice(model.steps.size, size=chains, p=model.steps.probs)
        s = model.steps.steps[idx]
        pos = hist[:, k - 1] + s
        hist[:, k] = pos
        cnt = (hist[:, 1:k] == pos[:, None, :]).all(axis=2).sum(axis=1)
        logw += s @ h - inc[cnt]
        if resample and k < n:
            finite = np.isfinite(logw)
            if not finite.any():
                return 0.0, np.zeros(chains)
            m = logw[finite].max()
            w = np.where(finite, np.exp(logw - m), 0.0)
            ess = w.sum() ** 2 / (w ** 2).sum()
            if ess < threshold * chains:
                log_norm += m + np.log(w.mean())
                pick = rng.choice(chains, size=chains, p=w / w.sum())
                hist = hist[pick]
                logw = np.zeros(chains)
    with np.errstate(over="ignore"):
        w = np.exp(logw + log_norm)
    return float(w.mean()), w


def annealed_partition_mc(model: PolymerModel, n: int, chains: int, seed: int,
                          resample: bool = False, groups: int = 20,
                          threshold: float = 0.5, ess_floor: float = 10.0) -> MCEstimate:
    """Sequential importance sampling estimate of Z_n(h) with P_d proposals.

    Without resampling every chain is an independent unbiased estimate. With
    resampling the chains are split into ``groups`` independent particle
    systems; each returns the product of mean incremental weights, which is
    unbiased, and the standard error is taken across groups.
    """
    if n < 1 or chains < 2:
        raise ValueError("need n >= 1 and chains >= 2")
    rng = np.random.default_rng(derive_seed(seed, n, chains))
    if not resample:
        _, w = _sis_group(model, n, chains, rng, False, threshold)
        tot = w.sum()
        ess = tot ** 2 / (w ** 2).sum() if tot > 0 else 0.0
        if ess < ess_floor:
            raise DegenerateWeights(f"effective sample size {ess:.1f} below floor {ess_floor}")
        return MCEstimate(float(w.mean()), float(w.std(ddof=1) / np.sqrt(chains)), float(ess), chains)
    per = max(2, chains // groups)
    ests = np.array([_sis_group(model, n, per, rng, True, threshold)[0] for _ in range(groups)])
    if not (ests > 0).any():
        raise DegenerateWeights("all particle systems died out")
    ess = ests.sum() ** 2 / (ests ** 2).sum()
    return MCEstimate(float(ests.mean()), float(ests.std(ddof=1) / np.sqrt(groups)), float(ess),
                      per * groups, True)


# -- two-point functions -------------------------------------------------------

@dataclass
class TwoPointResult:
    G: float
    H: float
    zhat: np.ndarray
    z: np.ndarray
    tail_bound: float


def two_point_functions(steps: StepDistribution, law: PotentialLaw, x, lam: float,
                        n_max: int, table: AnnealedTable | None = None) -> TwoPointResult:
    """Truncated killed two-point function and its first-hitting version at x.

    ``zhat[n]`` sums n-step paths ending at x that visit x once; ``z[n]``
    sums all n-step paths ending at x. No drift is applied.
    """
    if not lam > 0:
        raise LambdaNonpositive("a positive killing rate is needed to bound the tail")
    if table is None or table.n_max < n_max:
        table = AnnealedTable(steps, law, n_max)
    z = table.endpoint(x)[:n_max + 1]
    zhat = table.first[:n_max + 1, table.index(x)]
    disc = np.exp(-lam * np.arange(n_max + 1))
    tail = float(np.exp(-lam * (n_max + 1)) / (1.0 - np.exp(-lam)))
    return TwoPointResult(float(disc @ z), float(disc @ zhat), zhat.copy(), z.copy(), tail)


def inverse_correlation_length(table: AnnealedTable, lam: float, direction,
                               r_ladder: Sequence[int]) -> dict:
    """Fit -(1/r) log H_lam(floor(r x)) = tau + c/r along a direction."""
    direction = np.asarray(direction, dtype=float)
    disc = np.exp(-lam * np.arange(table.n_max + 1))
    rs, vals = [], []
    for r in r_ladder:
        x = np.floor(r * direction + 1e-12).astype(np.int64)
        if np.abs(x).max() > table.radius:
            continue
        H = disc @ table.first[:, table.index(x)]
        if H > 0:
            rs.append(r)
            vals.append(-np.log(H) / r)
    rs, vals = np.array(rs, dtype=float), np.array(vals)
    if len(rs) < 2:
        return {"tau": float(vals[-1]) if len(vals) else np.nan, "r": rs.tolist(), "values": vals.tolist()}
    A = np.vstack([np.ones_like(rs), 1.0 / rs]).T
    coef, *_ = np.linalg.lstsq(A, vals, rcond=None)
    return {"tau": float(coef[0]), "slope": float(coef[1]), "r": rs.tolist(), "values": vals.tolist()}


# -- free energies -------------------------------------------------------------

def subadditive_upper_bounds(a: Sequence[float], b: Sequence[float], tail: float = 0.0) -> np.ndarray:
    """Upper bounds on lim a_n / n for an almost subadditive sequence.

    Assumes a_{n+m} <= a_n + a_m + b_{n+m} with b nondecreasing. Entry n-1
    of the result is a_n/n - b_n/n + 4 sum_{k >= 2n} b_k / (k (k + 1)), where
    terms beyond the supplied b use ``tail`` as an upper bound on
    sum_{k > len(b)} b_k / (k (k + 1)).
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    K = len(b)
    ks = np.arange(1, K + 1)
    terms = b / (ks * (ks + 1.0))
    suffix = np.concatenate([np.cumsum(terms[::-1])[::-1], [0.0]]) + tail
    out = np.empty(len(a))
    for n in range(1, len(a) + 1):
        k0 = 2 * n
        s = suffix[k0 - 1] if k0 <= K else tail
        out[n - 1] = a[n - 1] / n - b[n - 1] / n + 4.0 * s
    return out


def confinement_lower_bound(steps: StepDistribution, L: int) -> float:
    """log of the top eigenvalue of the walk killed on leaving a box of side L.

    For laws with an atom at zero the potential cost of a confined path is
    bounded, so this is a lower bound for the annealed free energy at h = 0.
    """
    d = steps.dim
    shape = (L,) * d
    n = L ** d
    pts = np.indices(shape).reshape(d, -1).T
    M = lil_matrix((n, n))
    strides = L ** np.arange(d)
    for i, p in enumerate(pts):
        for s, q in zip(steps.steps, steps.probs):
            t = p + s
            if (t >= 0).all() and (t < L).all():
                M[i, int(t @ strides)] += q
    M = M.tocsr()
    if n <= 400:
        ev = np.max(np.abs(np.linalg.eigvals(M.toarray())))
    else:
        ev = np.max(np.abs(eigs(M, k=1, which="LM", return_eigenvectors=False)))
    return float(np.log(ev))


@dataclass
class FreeEnergyEstimate:
    ladder: list
    lambda_n: list
    mode: str
    estimate: float
    lower: float
    upper: float
    stderr: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in
                ("ladder", "lambda_n", "mode", "estimate", "lower", "upper", "stderr")}


def free_energy(model: PolymerModel, ladder: Sequence[int], mode: str = "annealed",
                seed: int | None = None, n_env: int = 32, fixed_env: bool = False,
                workers: int = 1, table: AnnealedTable | None = None) -> FreeEnergyEstimate:
    """Free-energy ladder lambda_n(h) = (1/n) log Z_n(h).

    Annealed: exact values; superadditivity makes max_n lambda_n a certified
    lower bound, and log E exp(h.X) is a certified upper bound. Quenched:
    averages over ``n_env`` environments, independent per n unless
    ``fixed_env``; the band is statistical only.
    """
    ladder = [int(n) for n in ladder]
    if sorted(ladder) != ladder or len(set(ladder)) != len(ladder) or ladder[0] < 1:
        raise ValueError("ladder must be strictly increasing positive integers")
    upper = model.steps.log_mgf(model.drift)
    if mode == "annealed":
        if table is None or table.n_max < ladder[-1]:
            table = AnnealedTable(model.steps, model.law, ladder[-1])
        lz = table.log_z(model.drift)
        lam_n = [float(lz[n] / n) for n in ladder]
        est = extrapolate_increments(lz[:ladder[-1] + 1])
        return FreeEnergyEstimate(ladder, lam_n, mode, float(min(max(est, max(lam_n)), upper)),
                                  float(max(lam_n)), float(upper))
    if mode != "quenched":
        raise ValueError("mode must be 'annealed' or 'quenched'")
    if seed is None:
        raise ValueError("quenched mode needs an environment seed")
    jobs = [(model, n, derive_seed(seed, 0 if fixed_env else n, i)) for n in ladder for i in range(n_env)]
    vals = np.array(pmap(_quenched_job, jobs, workers)).reshape(len(ladder), n_env)
    lam_n = vals.mean(axis=1)
    se = vals.std(axis=1, ddof=1) / np.sqrt(n_env)
    return FreeEnergyEstimate(ladder, lam_n.tolist(), mode, float(lam_n[-1]),
                              float(lam_n[-1] - 3 * se[-1]), float(lam_n[-1] + 3 * se[-1]), se.tolist())


def _quenched_job(args) -> float:
    model, n, s = args
    R = n * model.steps.range
    env = sample_environment(model.law, (-R,) * model.dim, (R,) * model.dim, s)
    return quenched_partition(model, env, n).log_z / n


# -- point to hyperplane -------------------------------------------------------

@dataclass
class HyperplaneResult:
    t: list
    log_d: list
    rate: float
    slope: float
    residuals: list
    truncation: float


def point_to_hyperplane(model: PolymerModel, env: EnvironmentField, lam: float,
                        t_ladder: Sequence[float], tol: float = 1e-13) -> HyperplaneResult:
    """Killed paths summed up to their first entry into {x . h >= t}.

    The walk is run until the mass left in the bulk, which bounds the
    truncation error, falls below ``tol`` times the accumulated total.
    The decay rate is the intercept of -(1/t) log D(t) against 1/t.
    """
    h = model.drift
    if not np.any(h):
        raise ValueError("drift direction must be nonzero")
    if not lam > 0:
        raise LambdaNonpositive("killing rate must be positive")
    d, R = model.dim, model.steps.range
    k_max = int(np.ceil(np.log(1.0 / tol) / lam)) + 1
    radius = k_max * R
    lo, hi = (-radius,) * d, (radius,) * d
    if not env.covers(lo, hi):
        raise EnvironmentCoverage(f"environment must cover the box of radius {radius}")
    expw = np.exp(model.law.log_weight(env.box(lo, hi))) * np.exp(-lam)
    proj = np.indices((2 * radius + 1,) * d).reshape(d, -1).T - radius
    proj = (proj @ h).reshape((2 * radius + 1,) * d)
    slices = [_shift_slices(s, radius) for s in model.steps.steps]
    out_t, out_d = [], []
    trunc = 0.0
    for t in t_ladder:
        if t <= 0:
            out_t.append(float(t))
            out_d.append(0.0)
            continue
        bulk = proj < t
        cur = np.zeros(proj.shape)
        cur[(radius,) * d] = 1.0
        D = 0.0
        for _ in range(k_max):
            new = np.zeros_like(cur)
            for c, (src, dst) in zip(model.steps.probs, slices):
                new[dst] += c * cur[src]
            new *= expw
            D += new[~bulk].sum()
            cur = np.where(bulk, new, 0.0)
            left = cur.sum()
            if left <= tol * max(D, 1e-300):
                break
        trunc = max(trunc, float(cur.sum()))
        out_t.append(float(t))
        out_d.append(float(np.log(D)) if D > 0 else -np.inf)
    ts = np.array([t for t in out_t if t > 0])
    ld = np.array([v for t, v in zip(out_t, out_d) if t > 0])
    rate, slope, res = np.nan, np.nan, []
    ok = np.isfinite(ld)
    if ok.sum() >= 2:
        A = np.vstack([np.ones(ok.sum()), 1.0 / ts[ok]]).T
        y = -ld[ok] / ts[ok]
        coef, *_ = np.linalg.lstsq(A, y, rcond=None)
        rate, slope = float(coef[0]), float(coef[1])
        res = (y - A @ coef).tolist()
    return HyperplaneResult(out_t, out_d, rate, slope, res, trunc)
