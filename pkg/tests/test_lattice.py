import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from polyrenewal.errors import EmptySupport, EnumerationCapExceeded, MissingUnitSteps, NonZeroMean
from polyrenewal.lattice import (LatticePath, concatenate, enumerate_path_array, enumerate_paths,
                                 local_time_profile, random_paths, simple_random_walk,
                                 validate_step_distribution)


def test_symmetric_walks_are_valid():
    s1 = validate_step_distribution([((1,), 0.5), ((-1,), 0.5)])
    assert s1.dim == 1 and s1.range == 1
    s2 = validate_step_distribution([((1, 0), .25), ((-1, 0), .25), ((0, 1), .25), ((0, -1), .25)])
    assert s2.dim == 2 and s2.range == 1


def test_invalid_step_distributions():
    with pytest.raises(NonZeroMean):
        validate_step_distribution([((1,), 0.7), ((-1,), 0.3)])
    with pytest.raises(EmptySupport):
        validate_step_distribution([])
    with pytest.raises(MissingUnitSteps):
        validate_step_distribution([((2,), 0.5), ((-2,), 0.5)])


@pytest.mark.parametrize("verts, expected", [
    ([0, 1, 0], {(1,): 1, (0,): 1}),
    ([0, 1, 2], {(1,): 1, (2,): 1}),
    ([0, 1, 0, 1], {(1,): 2, (0,): 1}),
])
def test_local_time_excludes_start(verts, expected):
    path = LatticePath(np.array(verts)[:, None])
    assert dict(local_time_profile(path)) == expected


def test_concatenation_examples():
    a = LatticePath(np.array([[0], [1]]))
    assert concatenate(a, a).as_tuples() == [(0,), (1,), (2,)]
    g = LatticePath(np.array([[0], [1], [0]]))
    assert concatenate(LatticePath(np.array([[0]])), g).as_tuples() == g.as_tuples()
    c = concatenate(g, LatticePath(np.array([[0], [-1]])))
    assert c.as_tuples() == [(0,), (1,), (0,), (-1,)]
    assert dict(local_time_profile(c)) == {(1,): 1, (0,): 1, (-1,): 1}


def test_enumeration_counts():
    s1 = simple_random_walk(1)
    paths = list(enumerate_paths(s1, 2))
    assert len(paths) == 4 and all(p == 0.25 for _, p in paths)
    empty = list(enumerate_paths(s1, 0))
    assert len(empty) == 1 and empty[0][0].n == 0 and empty[0][1] == 1.0
    verts, probs = enumerate_path_array(simple_random_walk(2), 3)
    assert len(probs) == 64 and abs(probs.sum() - 1) < 1e-12


@pytest.mark.parametrize("d, n", [(1, 10), (2, 6), (3, 4)])
def test_enumerated_probabilities_sum_to_one(d, n):
    _, probs = enumerate_path_array(simple_random_walk(d), n)
    assert abs(probs.sum() - 1) <= 1e-12


def test_enumeration_cap():
    with pytest.raises(EnumerationCapExceeded):
        list(enumerate_paths(simple_random_walk(2), 12, cap=1000))


walks = st.integers(1, 3).flatmap(
    lambda d: st.tuples(st.just(d), st.lists(st.integers(0, 2 * d - 1), max_size=12),
                        st.lists(st.integers(0, 2 * d - 1), max_size=12)))


def _path(d, idx):
    steps = simple_random_walk(d).steps
    return LatticePath.from_steps(steps[idx].reshape(-1, d) if idx else np.zeros((0, d), dtype=int))


@settings(max_examples=300, deadline=None)
@given(walks)
def test_concatenation_is_additive(args):
    d, a, b = args
    g, h = _path(d, a), _path(d, b)
    c = concatenate(g, h)
    assert c.n == g.n + h.n
    assert np.array_equal(c.displacement, g.displacement + h.displacement)
    shifted = {tuple(np.add(k, g.end)): v for k, v in local_time_profile(h).items()}
    total = local_time_profile(g)
    for k, v in shifted.items():
        total[k] += v
    assert local_time_profile(c) == total


def test_random_paths_are_admissible():
    s = simple_random_walk(2)
    arr = random_paths(s, 20, 50, np.random.default_rng(0))
    assert arr.shape == (50, 21, 2)
    for verts in arr:
        p = LatticePath(verts)
        assert p.is_admissible(s) and p.n == 20
        assert abs(p.log_probability(s) - 20 * np.log(0.25)) < 1e-12
