import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from polyrenewal.environment import (EnvironmentField, PotentialLaw, centered_box, law_preset,
                                     sample_environment)
from polyrenewal.errors import LambdaNonpositive
from polyrenewal.lattice import enumerate_paths, simple_random_walk
from polyrenewal.partition import (AnnealedTable, PolymerModel, annealed_partition_exact,
                                   annealed_partition_mc, annealed_path_log_weight,
                                   confinement_lower_bound, free_energy, point_to_hyperplane,
                                   quenched_partition, quenched_partition_bruteforce,
                                   two_point_functions)

SRW1, SRW2 = simple_random_walk(1), simple_random_walk(2)


def _field(law, radius, d, fill):
    lo, hi = centered_box(d, radius)
    return EnvironmentField(law, lo, hi, 0, np.full((2 * radius + 1,) * d, fill))


def test_quenched_small_examples():
    law = PotentialLaw.two_point(0.0, np.log(2.0), 0.5)
    env = _field(law, 3, 1, np.log(2.0))
    model = PolymerModel(SRW1, law)
    assert abs(np.exp(quenched_partition(model, env, 2).log_z) - 0.25) < 1e-15
    assert quenched_partition(model, env, 0).log_z == 0.0
    traps = PotentialLaw.pure_traps(0.5)
    values = np.zeros(7)
    values[3 + 1] = np.inf
    env = EnvironmentField(traps, (-3,), (3,), 0, values)
    assert abs(np.exp(quenched_partition(PolymerModel(SRW1, traps), env, 1).log_z) - 0.5) < 1e-15


def test_quenched_endpoint_table_sums_to_total():
    model = PolymerModel(SRW2, law_preset("two-point"), h=[0.4, -0.1])
    env = sample_environment(model.law, *centered_box(2, 7), seed=4)
    res = quenched_partition(model, env, 7, table=True)
    tab = res.log_table[np.isfinite(res.log_table)]
    assert abs(np.log(np.exp(tab).sum()) - res.log_z) < 1e-12


@pytest.mark.parametrize("d", [1, 2])
def test_quenched_dp_matches_enumeration(d):
    model = PolymerModel(simple_random_walk(d), law_preset("traps-0.7"), h=[0.2] * d)
    for seed in range(5):
        env = sample_environment(model.law, *centered_box(d, 6), seed=seed)
        a = quenched_partition(model, env, 6).log_z
        b = quenched_partition_bruteforce(model, env, 6)
        assert a == b or abs(a - b) <= 1e-10 * max(1.0, abs(b))


def test_annealed_trap_examples():
    model = PolymerModel(SRW1, PotentialLaw.pure_traps(0.5))
    assert abs(np.exp(annealed_partition_exact(model, 2).log_z) - 0.25) < 1e-15
    assert abs(np.exp(annealed_partition_exact(model, 3).log_z) - 0.1875) < 1e-15


@settings(max_examples=25, deadline=None)
@given(h=st.lists(st.floats(-1.5, 1.5), min_size=2, max_size=2), n=st.integers(0, 6))
def test_annealed_without_potential_is_free_walk(h, n):
    model = PolymerModel(SRW2, PotentialLaw.zero(), h=h)
    assert abs(annealed_partition_exact(model, n).log_z - n * SRW2.log_mgf(h)) < 1e-11


def test_annealed_table_matches_enumeration_endpoints():
    model = PolymerModel(SRW2, law_preset("traps-0.8"), h=[0.3, 0.1])
    tab = AnnealedTable(SRW2, model.law, 6)
    exact = annealed_partition_exact(model, 6, table=True).table
    for x, lz in exact.items():
        val = np.log(tab.endpoint(x)[6]) + np.dot(x, model.drift)
        assert abs(val - lz) < 1e-11


def test_mc_estimator_traps_half():
    model = PolymerModel(SRW1, law_preset("traps-half"))
    est = annealed_partition_mc(model, 3, 100000, seed=1)
    assert abs(est.mean - 0.1875) <= 4 * est.stderr


def test_mc_estimator_free_walk():
    model = PolymerModel(SRW2, PotentialLaw.zero(), h=[0.3, -0.2])
    est = annealed_partition_mc(model, 8, 20000, seed=2)
    assert abs(est.mean - np.exp(8 * SRW2.log_mgf(model.drift))) <= 4 * est.stderr


def test_mc_resampled_matches_exact():
    model = PolymerModel(SRW2, law_preset("traps-0.8"), h=[1.0, 0.0])
    exact = np.exp(annealed_partition_exact(model, 8).log_z)
    est = annealed_partition_mc(model, 8, 20000, seed=3, resample=True)
    assert abs(est.mean - exact) <= 4 * est.stderr


def test_large_beta_lowers_partition_function():
    h = [0.5, 0.0]
    free = np.exp(10 * SRW2.log_mgf(h))
    model = PolymerModel(SRW2, PotentialLaw.two_point(0.0, 1.0, 0.7, beta=6.0), h=h)
    exact = np.exp(AnnealedTable(SRW2, model.law, 10).log_z(model.drift)[10])
    est = annealed_partition_mc(model, 10, 20000, seed=5, resample=True)
    assert est.mean < free and exact < free and abs(est.mean - exact) <= 4 * est.stderr


def test_zhat_supermultiplicative():
    tab = AnnealedTable(SRW2, law_preset("traps-0.7"), 10)
    rng = np.random.default_rng(0)
    checked = 0
    while checked < 100:
        n, m = rng.integers(1, 6, size=2)
        x, y = rng.integers(-3, 4, size=(2, 2))
        a, b, c = tab.log_zhat(x)[n], tab.log_zhat(y)[m], tab.log_zhat(x + y)[n + m]
        if np.isfinite(a) and np.isfinite(b):
            assert c >= a + b - 1e-12
            checked += 1


def test_two_point_first_term_and_enumeration():
    p, lam = 0.5, 1.0
    law = PotentialLaw.pure_traps(p)
    res = two_point_functions(SRW1, law, [1], lam, 12)
    assert abs(res.zhat[1] - p / 2) < 1e-15
    model = PolymerModel(SRW1, law)
    brute = 0.0
    for n in range(1, 13):
        for path, _ in enumerate_paths(SRW1, n):
            hits = [i for i, v in enumerate(path.as_tuples()) if v == (1,)]
            if hits == [n]:
                brute += np.exp(annealed_path_log_weight(model, path) - lam * n)
    assert abs(res.H - brute) < 1e-13
    assert res.G >= res.H and res.tail_bound > 0
    assert two_point_functions(SRW1, law, [0], lam, 4).G >= 1.0
    with pytest.raises(LambdaNonpositive):
        two_point_functions(SRW1, law, [1], 0.0, 4)


def test_free_energy_ladders():
    ladder = [2, 4, 6, 8]
    free = free_energy(PolymerModel(SRW2, PotentialLaw.zero(), h=[0.4, 0.2]), ladder)
    assert np.allclose(free.lambda_n, SRW2.log_mgf([0.4, 0.2]), atol=1e-12)
    traps = PolymerModel(SRW2, law_preset("traps-0.8"))
    ann = free_energy(traps, ladder)
    assert all(v <= 1e-15 for v in ann.lambda_n)
    bounds = [confinement_lower_bound(SRW2, L) for L in (4, 8, 16)]
    assert bounds[0] < bounds[1] < bounds[2] < 0
    model = PolymerModel(SRW2, law_preset("two-point"), h=[0.5, 0.0])
    q = free_energy(model, ladder, mode="quenched", seed=1, n_env=40)
    a = free_energy(model, ladder)
    for lq, la, se in zip(q.lambda_n, a.lambda_n, q.stderr):
        assert lq <= la + 3 * se


def test_hyperplane_free_walk_closed_form():
    # first passage of the killed +-1 walk to level t has generating value s^t
    lam = 0.7
    z = np.exp(-lam)
    s = (1 - np.sqrt(1 - z ** 2)) / z
    model = PolymerModel(SRW1, PotentialLaw.zero(), h=[1.0])
    env = _field(PotentialLaw.zero(), 60, 1, 0.0)
    res = point_to_hyperplane(model, env, lam, [0, 1, 2, 4, 8])
    assert res.log_d[0] == 0.0
    for t, ld in zip(res.t[1:], res.log_d[1:]):
        assert abs(ld - t * np.log(s)) < 1e-9
    assert abs(res.rate + np.log(s)) < 1e-8


def test_hyperplane_monotone_in_beta():
    for seed in range(5):
        law = PotentialLaw.two_point(0.0, 1.0, 0.5, beta=0.5)
        env = sample_environment(law, *centered_box(2, 40), seed=seed)
        m1 = PolymerModel(SRW2, law, h=[1.0, 0.0])
        m2 = PolymerModel(SRW2, law.with_beta(1.0), h=[1.0, 0.0])
        env2 = EnvironmentField(m2.law, env.lo, env.hi, seed, env.values)
        d1 = point_to_hyperplane(m1, env, 1.0, [3.0]).log_d[0]
        d2 = point_to_hyperplane(m2, env2, 1.0, [3.0]).log_d[0]
        assert d2 <= d1
