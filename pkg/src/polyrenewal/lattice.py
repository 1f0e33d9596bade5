"""Random-walk primitives: step laws, lattice paths, local times, enumeration."""
from __future__ import annotations

import itertools
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterator, Sequence

import numpy as np

from .errors import (EmptySupport, EnumerationCapExceeded, MissingUnitSteps,
                     NegativeWeight, NonZeroMean)

ENUMERATION_CAP = 10**7
_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class StepDistribution:
    """Finite-range zero-mean step law on Z^d.

    ``steps`` is a (k, d) integer array and ``probs`` the matching
    probabilities. Build instances through :func:`validate_step_distribution`.
    """

    steps: np.ndarray
    probs: np.ndarray

    def __post_init__(self):
        self.steps.setflags(write=False)
        self.probs.setflags(write=False)

    @property
    def dim(self) -> int:
        return self.steps.shape[1]

    @property
    def range(self) -> int:
        return int(np.abs(self.steps).max())

    @property
    def size(self) -> int:
        return self.steps.shape[0]

    def log_mgf(self, h) -> float:
        """log E exp(h . X) for a single step."""
        h = np.asarray(h, dtype=float).reshape(self.dim)
        a = self.steps @ h
        m = a.max()
        return float(m + np.log(np.dot(self.probs, np.exp(a - m))))

    def index_of(self, step) -> int:
        hit = np.flatnonzero((self.steps == np.asarray(step)).all(axis=1))
        return int(hit[0]) if hit.size else -1

    def __eq__(self, other):
        return (isinstance(other, StepDistribution)
                and np.array_equal(self.steps, other.steps)
                and np.array_equal(self.probs, other.probs))

    def __hash__(self):
        return hash((self.steps.tobytes(), self.probs.tobytes()))


def _as_weight(w) -> float:
    if isinstance(w, str):
        return float(Fraction(w.strip()))
    return float(w)


def validate_step_distribution(raw: Sequence) -> StepDistribution:
    """Normalise and validate a list of ``(vector, weight)`` pairs.

    Weights may be numbers or strings such as ``"1/4"``. Zero weights are
    dropped and repeated vectors are merged.
    """
    if len(raw) == 0:
        raise EmptySupport("step distribution has no entries")
    merged: dict[tuple, float] = {}
    dim = None
    for vec, w in raw:
        v = tuple(int(c) for c in np.atleast_1d(vec))
        if dim is None:
            dim = len(v)
        elif len(v) != dim:
            raise ValueError("step vectors of mixed dimension")
        w = _as_weight(w)
        if w < 0 or not np.isfinite(w):
            raise NegativeWeight(f"weight {w} for step {v}")
        if w > 0:
            merged[v] = merged.get(v, 0.0) + w
    if not merged or dim == 0:
        raise EmptySupport("all weights vanish")
    keys = sorted(merged)
    steps = np.array(keys, dtype=np.int64).reshape(len(keys), dim)
    probs = np.array([merged[k] for k in keys])
    probs = probs / probs.sum()
    mean = probs @ steps
    if np.max(np.abs(mean)) > _TOL:
        raise NonZeroMean(f"mean step {mean} is not zero")
    for k in range(dim):
        for sign in (1, -1):
            e = np.zeros(dim, dtype=np.int64)
            e[k] = sign
            if not (steps == e).all(axis=1).any():
                raise MissingUnitSteps(f"unit step {e.tolist()} missing")
    return StepDistribution(steps, probs)


def simple_random_walk(d: int) -> StepDistribution:
    """Nearest-neighbour walk on Z^d."""
    raw = []
    for k in range(d):
        for sign in (1, -1):
            e = [0] * d
            e[k] = sign
            raw.append((e, 1.0 / (2 * d)))
    return validate_step_distribution(raw)


STEP_PRESETS = {f"srw{d}d": d for d in (1, 2, 3, 4)}


def step_preset(name: str) -> StepDistribution:
    if name not in STEP_PRESETS:
        raise KeyError(f"unknown step preset {name!r}; have {sorted(STEP_PRESETS)}")
    return simple_random_walk(STEP_PRESETS[name])


@dataclass(frozen=True, eq=False)
class LatticePath:
    """Path stored as absolute vertices ``gamma_0, ..., gamma_n``."""

    vertices: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=np.int64)
        if v.ndim == 1:
            v = v.reshape(-1, 1)
        v = np.ascontiguousarray(v)
        v.setflags(write=False)
        object.__setattr__(self, "vertices", v)

    @classmethod
    def from_steps(cls, increments, start=None) -> "LatticePath":
        inc = np.asarray(increments, dtype=np.int64)
        if inc.ndim == 1:
            inc = inc.reshape(-1, 1)
        d = inc.shape[1]
        s = np.zeros(d, dtype=np.int64) if start is None else np.asarray(start, dtype=np.int64)
        return cls(np.vstack([s, s + np.cumsum(inc, axis=0)]))

    @property
    def n(self) -> int:
        return self.vertices.shape[0] - 1

    def __len__(self) -> int:
        return self.n

    @property
    def dim(self) -> int:
        return self.vertices.shape[1]

    @property
    def start(self) -> np.ndarray:
        return self.vertices[0]

    @property
    def end(self) -> np.ndarray:
        return self.vertices[-1]

    @property
    def displacement(self) -> np.ndarray:
        return self.vertices[-1] - self.vertices[0]

    def increments(self) -> np.ndarray:
        return np.diff(self.vertices, axis=0)

    def is_admissible(self, steps: StepDistribution) -> bool:
        inc = self.increments()
        if inc.shape[0] == 0:
            return True
        match = (inc[:, None, :] == steps.steps[None, :, :]).all(axis=2).any(axis=1)
        return bool(match.all())

    def log_probability(self, steps: StepDistribution) -> float:
        logp = 0.0
        for s in self.increments():
            i = steps.index_of(s)
            if i < 0:
                return -np.inf
            logp += np.log(steps.probs[i])
        return logp

    def segment(self, i: int, j: int) -> "LatticePath":
        return LatticePath(self.vertices[i:j + 1])

    def as_tuples(self) -> list[tuple]:
        return [tuple(int(c) for c in v) for v in self.vertices]

    def __eq__(self, other):
        return isinstance(other, LatticePath) and np.array_equal(self.vertices, other.vertices)

    def __hash__(self):
        return hash(self.vertices.tobytes())

    def __repr__(self):
        if self.dim == 1:
            return f"LatticePath({self.vertices[:, 0].tolist()})"
        return f"LatticePath({self.as_tuples()})"


def _key(v) -> tuple:
    return tuple(int(c) for c in v)


def local_time_profile(path: LatticePath) -> Counter:
    """Visit counts over indices 1..n; the starting vertex is not counted."""
    return Counter(_key(v) for v in path.vertices[1:])


def concatenate(left: LatticePath, right: LatticePath) -> LatticePath:
    """Append ``right`` translated so that it starts at the end of ``left``."""
    shifted = right.vertices[1:] - right.vertices[0] + left.vertices[-1]
    return LatticePath(np.vstack([left.vertices, shifted]))


def enumeration_cost(steps: StepDistribution, n: int) -> int:
    return steps.size ** n * max(n, 1)


def _check_cap(steps: StepDistribution, n: int, cap: int) -> None:
    if n < 0:
        raise ValueError("n must be nonnegative")
    cost = enumeration_cost(steps, n)
    if cost > cap:
        raise EnumerationCapExceeded(
            f"{steps.size}^{n} paths x {n} steps = {cost} exceeds cap {cap}")


def enumerate_paths(steps: StepDistribution, n: int,
                    cap: int = ENUMERATION_CAP) -> Iterator[tuple[LatticePath, float]]:
    """Yield every n-step path from the origin with its probability."""
    _check_cap(steps, n, cap)
    for idx in itertools.product(range(steps.size), repeat=n):
        idx = list(idx)
        prob = float(np.prod(steps.probs[idx])) if n else 1.0
        yield LatticePath.from_steps(steps.steps[idx].reshape(n, steps.dim)), prob


def enumerate_path_array(steps: StepDistribution, n: int,
                         cap: int = ENUMERATION_CAP) -> tuple[np.ndarray, np.ndarray]:
    """All n-step paths as a (k^n, n+1, d) vertex array plus probabilities."""
    _check_cap(steps, n, cap)
    k, d = steps.size, steps.dim
    if n == 0:
        return np.zeros((1, 1, d), dtype=np.int64), np.ones(1)
    idx = np.indices((k,) * n).reshape(n, -1).T
    inc = steps.steps[idx]
    verts = np.concatenate([np.zeros((idx.shape[0], 1, d), dtype=np.int64),
                            np.cumsum(inc, axis=1)], axis=1)
    probs = np.prod(steps.probs[idx], axis=1)
    return verts, probs


def random_paths(steps: StepDistribution, n: int, count: int,
                 rng: np.random.Generator) -> np.ndarray:
    """Sample ``count`` independent n-step walks; returns a vertex array."""
    idx = rng.choice(steps.size, size=(count, n), p=steps.probs)
    inc = steps.steps[idx]
    zero = np.zeros((count, 1, steps.dim), dtype=np.int64)
    return np.concatenate([zero, np.cumsum(inc, axis=1)], axis=1)
