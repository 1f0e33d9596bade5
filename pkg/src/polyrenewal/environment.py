"""Random site potentials: laws, reproducible sampling and the one-site annealed potential."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.special import logsumexp

from .errors import EnvironmentCoverage, RegionTooLarge, UnsupportedLaw

INF = np.inf
MEMORY_CAP_SITES = 2 * 10**7

# Site-percolation thresholds on Z^d; standard numerical estimates.
SITE_PERCOLATION_THRESHOLD = {1: 1.0, 2: 0.592746, 3: 0.311608, 4: 0.196889}


@dataclass(frozen=True)
class PotentialLaw:
    """Law of a single site potential together with the inverse temperature.

    ``kind`` is one of ``"trap"``, ``"two_point"``, ``"exponential"`` or
    ``"discrete"``. Use the constructors below rather than filling fields
    by hand.
    """

    kind: str
    atoms: tuple = ()
    rate: float = 0.0
    beta: float = 1.0

    @staticmethod
    def bernoulli_trap(p_inf: float, beta: float = 1.0) -> "PotentialLaw":
        """V = +inf with probability ``p_inf``, else 0."""
        _check_prob(p_inf)
        return PotentialLaw("trap", ((0.0, 1.0 - p_inf), (INF, p_inf)), beta=beta)

    @staticmethod
    def pure_traps(p_open: float, beta: float = 1.0) -> "PotentialLaw":
        """Traps with Q(V = 0) = ``p_open``."""
        return PotentialLaw.bernoulli_trap(1.0 - p_open, beta)

    @staticmethod
    def two_point(v0: float, v1: float, p: float, beta: float = 1.0) -> "PotentialLaw":
        """V = v1 with probability ``p``, else v0."""
        _check_prob(p)
        return PotentialLaw("two_point", ((float(v0), 1.0 - p), (float(v1), p)), beta=beta)

    @staticmethod
    def exponential(rate: float, beta: float = 1.0) -> "PotentialLaw":
        if rate <= 0:
            raise ValueError("rate must be positive")
        return PotentialLaw("exponential", rate=float(rate), beta=beta)

    @staticmethod
    def discrete(atoms: Sequence, beta: float = 1.0) -> "PotentialLaw":
        pairs = tuple((float(v), float(q)) for v, q in atoms)
        total = sum(q for _, q in pairs)
        if any(q < 0 for _, q in pairs) or total <= 0:
            raise ValueError("atom probabilities must be nonnegative with positive sum")
        return PotentialLaw("discrete", tuple((v, q / total) for v, q in pairs), beta=beta)

    @staticmethod
    def zero() -> "PotentialLaw":
        return PotentialLaw("discrete", ((0.0, 1.0),), beta=1.0)

    def __post_init__(self):
        if self.kind not in ("trap", "two_point", "exponential", "discrete"):
            raise UnsupportedLaw(f"unknown law kind {self.kind!r}")
        if not self.beta > 0:
            raise ValueError("beta must be positive")
        for v, q in self.atoms:
            if v < 0:
                raise ValueError(f"negative atom {v}")
            if q < 0:
                raise ValueError(f"negative probability {q}")

    def with_beta(self, beta: float) -> "PotentialLaw":
        return PotentialLaw(self.kind, self.atoms, self.rate, beta)

    @property
    def is_discrete(self) -> bool:
        return self.kind != "exponential"

    def support_atoms(self) -> list[tuple[float, float]]:
        return [(v, q) for v, q in self.atoms if q > 0]

    @property
    def p_finite(self) -> float:
        """Q(V < inf)."""
        if not self.is_discrete:
            return 1.0
        return float(sum(q for v, q in self.atoms if np.isfinite(v)))

    @property
    def is_trivial(self) -> bool:
        return self.is_discrete and len(self.support_atoms()) == 1

    @property
    def is_zero(self) -> bool:
        return self.is_discrete and all(v == 0 for v, _ in self.support_atoms())

    def satisfies_a1(self) -> bool:
        """Non-trivial law with 0 in its support."""
        if not self.is_discrete:
            return True
        return (not self.is_trivial) and any(v == 0 for v, _ in self.support_atoms())

    def a2_report(self, d: int) -> dict:
        """Advisory comparison of Q(V < inf) with the site-percolation threshold."""
        pc = SITE_PERCOLATION_THRESHOLD.get(d)
        return {"p_finite": self.p_finite, "p_c": pc,
                "holds": None if pc is None else bool(self.p_finite > pc)}

    def quantile(self, u: np.ndarray) -> np.ndarray:
        """Inverse distribution function applied to uniforms in [0, 1)."""
        u = np.asarray(u, dtype=float)
        if self.kind == "exponential":
            return -np.log1p(-u) / self.rate
        vals = np.array([v for v, _ in self.atoms])
        cdf = np.cumsum([q for _, q in self.atoms])
        cdf[-1] = 1.0
        idx = np.searchsorted(cdf, u, side="right")
        return vals[np.minimum(idx, len(vals) - 1)]

    def log_weight(self, v) -> np.ndarray:
        """Per-visit log weight -beta*V, with -inf on traps."""
        v = np.asarray(v, dtype=float)
        with np.errstate(invalid="ignore"):
            out = -self.beta * v
        return np.where(np.isinf(v), -np.inf, out)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "atoms": [[_enc(v), q] for v, q in self.atoms],
                "rate": self.rate, "beta": self.beta}


def _enc(v: float):
    return "inf" if np.isinf(v) else v


def _check_prob(p: float) -> None:
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"probability {p} outside [0, 1]")


def phi_beta(law: PotentialLaw, ell: int) -> float:
    """-log E exp(-beta * ell * V) for a site visited ``ell`` times."""
    if ell < 0:
        raise ValueError("ell must be nonnegative")
    if ell == 0:
        return 0.0
    if law.kind == "exponential":
        return float(np.log1p(law.beta * ell / law.rate))
    logs, weights = [], []
    for v, q in law.support_atoms():
        if np.isinf(v):
            continue
        logs.append(-law.beta * ell * v)
        weights.append(q)
    if not logs:
        return INF
    return float(-logsumexp(logs, b=weights))


def phi_table(law: PotentialLaw, ell_max: int) -> np.ndarray:
    """Array with entry ell = phi_beta(ell) for ell = 0..ell_max."""
    return np.array([phi_beta(law, ell) for ell in range(ell_max + 1)])


@dataclass
class AttractivityReport:
    subadditive: list = field(default_factory=list)
    monotone: list = field(default_factory=list)
    min_at_one: list = field(default_factory=list)
    ratio_decreasing: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not (self.subadditive or self.monotone or self.min_at_one or self.ratio_decreasing)


def check_attractivity(law: PotentialLaw, ell_max: int, tol: float = 1e-12) -> AttractivityReport:
    """Audit subadditivity, monotonicity, minimum at one and decay of phi(l)/l."""
    if ell_max < 2:
        raise ValueError("ell_max must be at least 2")
    phi = phi_table(law, ell_max)
    rep = AttractivityReport()
    if np.isinf(phi[1]):
        return rep
    for a in range(1, ell_max):
        for b in range(1, ell_max - a + 1):
            if phi[a + b] > phi[a] + phi[b] + tol:
                rep.subadditive.append((a, b))
    for ell in range(1, ell_max):
        if phi[ell + 1] < phi[ell] - tol:
            rep.monotone.append(ell)
        if phi[ell + 1] / (ell + 1) > phi[ell] / ell + tol:
            rep.ratio_decreasing.append(ell)
    if phi[1] > phi[1:].min() + tol:
        rep.min_at_one.append(int(np.argmin(phi[1:]) + 1))
    return rep


# -- counter-based per-site uniforms ------------------------------------------

_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_GOLD = np.uint64(0x9E3779B97F4A7C15)


def _splitmix(x: np.ndarray) -> np.ndarray:
    x = x + _GOLD
    x = (x ^ (x >> np.uint64(30))) * _M1
    x = (x ^ (x >> np.uint64(27))) * _M2
    return x ^ (x >> np.uint64(31))


def site_uniforms(seed: int, sites: np.ndarray) -> np.ndarray:
    """Uniforms in [0, 1) that depend only on ``(seed, site)``."""
    sites = np.atleast_2d(np.asarray(sites, dtype=np.int64))
    with np.errstate(over="ignore"):
        h = _splitmix(np.full(sites.shape[0], np.uint64(seed & 0xFFFFFFFFFFFFFFFF)))
        for k in range(sites.shape[1]):
            h = _splitmix(h ^ sites[:, k].astype(np.uint64))
    return (h >> np.uint64(11)).astype(np.float64) * 2.0**-53


@dataclass(frozen=True, eq=False)
class EnvironmentField:
    """Site potentials on the box ``lo <= x <= hi`` (inclusive, componentwise).

    When ``values`` is None the field is served lazily from the site hash,
    which gives the same numbers as the materialised array.
    """

    law: PotentialLaw
    lo: tuple
    hi: tuple
    seed: int
    values: np.ndarray | None = None

    @property
    def dim(self) -> int:
        return len(self.lo)

    @property
    def shape(self) -> tuple:
        return tuple(h - l + 1 for l, h in zip(self.lo, self.hi))

    def covers(self, lo, hi) -> bool:
        return all(a <= b for a, b in zip(self.lo, lo)) and all(a >= b for a, b in zip(self.hi, hi))

    def contains(self, sites) -> np.ndarray:
        s = np.atleast_2d(np.asarray(sites, dtype=np.int64))
        return ((s >= np.array(self.lo)) & (s <= np.array(self.hi))).all(axis=1)

    def value_at(self, sites) -> np.ndarray:
        s = np.atleast_2d(np.asarray(sites, dtype=np.int64))
        if not self.contains(s).all():
            raise EnvironmentCoverage("site outside the sampled region")
        if self.values is None:
            return self.law.quantile(site_uniforms(self.seed, s))
        idx = tuple((s - np.array(self.lo)).T)
        return self.values[idx]

    def box(self, lo, hi) -> np.ndarray:
        """Dense array of values on a sub-box."""
        if not self.covers(lo, hi):
            raise EnvironmentCoverage(f"box {lo}..{hi} not inside {self.lo}..{self.hi}")
        if self.values is not None:
            sl = tuple(slice(a - l, b - l + 1) for a, b, l in zip(lo, hi, self.lo))
            return self.values[sl]
        return _hashed_box(self.law, self.seed, lo, hi)

    def log_weights(self) -> np.ndarray:
        if self.values is None:
            raise RegionTooLarge("log weights need a materialised field")
        return self.law.log_weight(self.values)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow([f"x{k + 1}" for k in range(self.dim)] + ["value"])
        grid = np.indices(self.shape).reshape(self.dim, -1).T + np.array(self.lo)
        for site, v in zip(grid, self.value_at(grid)):
            w.writerow(list(site) + ["inf" if np.isinf(v) else repr(float(v))])
        return buf.getvalue()


def _hashed_box(law: PotentialLaw, seed: int, lo, hi) -> np.ndarray:
    shape = tuple(b - a + 1 for a, b in zip(lo, hi))
    grid = np.indices(shape).reshape(len(shape), -1).T + np.array(lo)
    return law.quantile(site_uniforms(seed, grid)).reshape(shape)


def sample_environment(law: PotentialLaw, lo, hi, seed: int, materialize: bool = True,
                       memory_cap: int = MEMORY_CAP_SITES) -> EnvironmentField:
    """Sample i.i.d. potentials on a box, deterministically in ``seed``.

    With ``materialize=False`` boxes beyond the memory cap are served lazily.
    """
    lo, hi = tuple(int(a) for a in np.atleast_1d(lo)), tuple(int(b) for b in np.atleast_1d(hi))
    if len(lo) != len(hi) or any(b < a for a, b in zip(lo, hi)):
        raise ValueError("empty region")
    n_sites = int(np.prod([b - a + 1 for a, b in zip(lo, hi)]))
    if n_sites > memory_cap:
        if materialize:
            raise RegionTooLarge(f"{n_sites} sites exceeds cap {memory_cap}")
        return EnvironmentField(law, lo, hi, int(seed), None)
    vals = _hashed_box(law, int(seed), lo, hi)
    vals.setflags(write=False)
    return EnvironmentField(law, lo, hi, int(seed), vals)


def centered_box(d: int, radius: int) -> tuple[tuple, tuple]:
    return (-radius,) * d, (radius,) * d


LAW_PRESETS = {
    "traps-half": lambda: PotentialLaw.pure_traps(0.5),
    "traps-0.6": lambda: PotentialLaw.pure_traps(0.6),
    "traps-0.7": lambda: PotentialLaw.pure_traps(0.7),
    "traps-0.8": lambda: PotentialLaw.pure_traps(0.8),
    "two-point": lambda: PotentialLaw.two_point(0.0, 1.0, 0.5, beta=1.0),
    "exponential": lambda: PotentialLaw.exponential(1.0, beta=1.0),
    "zero": PotentialLaw.zero,
}


def law_preset(name: str) -> PotentialLaw:
    if name not in LAW_PRESETS:
        raise KeyError(f"unknown law preset {name!r}; have {sorted(LAW_PRESETS)}")
    return LAW_PRESETS[name]()
