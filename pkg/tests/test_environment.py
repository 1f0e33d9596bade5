import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from polyrenewal.environment import (LAW_PRESETS, PotentialLaw, centered_box, check_attractivity,
                                     law_preset, phi_beta, phi_table, sample_environment)


def test_degenerate_trap_laws():
    lo, hi = centered_box(2, 5)
    none = sample_environment(PotentialLaw.bernoulli_trap(0.0), lo, hi, seed=3)
    assert np.all(none.box(lo, hi) == 0)
    full = sample_environment(PotentialLaw.bernoulli_trap(1.0), lo, hi, seed=3)
    assert np.all(np.isinf(full.box(lo, hi)))


def test_two_point_empirical_mean():
    env = sample_environment(PotentialLaw.two_point(0, 1, 0.5), (0,), (9999,), seed=11)
    assert 0.45 <= env.box((0,), (9999,)).mean() <= 0.55


def test_phi_examples():
    p = 0.37
    traps = PotentialLaw.pure_traps(p)
    for ell in (1, 2, 5, 40):
        assert abs(phi_beta(traps, ell) + np.log(p)) < 1e-14
    assert phi_beta(PotentialLaw.zero(), 7) == 0.0
    ref = -np.log(0.5 + 0.5 * np.exp(-1.0))
    assert abs(phi_beta(PotentialLaw.two_point(0, 1, 0.5), 1) - ref) < 1e-14
    assert abs(ref - 0.37989) < 1e-5


def test_exponential_phi_closed_form():
    # E exp(-l beta V) for V ~ Exp(rate) is rate / (rate + l beta)
    law = PotentialLaw.exponential(2.0, beta=0.5)
    for ell in (1, 3, 10):
        assert abs(phi_beta(law, ell) - np.log((2.0 + 0.5 * ell) / 2.0)) < 1e-12


def test_pure_traps_strictly_subadditive():
    traps = PotentialLaw.pure_traps(0.6)
    nu = -np.log(0.6)
    assert phi_beta(traps, 3 + 4) < phi_beta(traps, 3) + phi_beta(traps, 4)
    assert abs(phi_beta(traps, 3) + phi_beta(traps, 4) - 2 * nu) < 1e-14


@pytest.mark.parametrize("name", sorted(LAW_PRESETS))
def test_presets_are_attractive(name):
    law = law_preset(name)
    rep = check_attractivity(law, 64)
    assert rep.ok
    phi = phi_table(law, 64)[1:]
    if np.all(np.isfinite(phi)):
        assert np.all(np.diff(phi) >= -1e-12)
        assert np.all(np.diff(phi / np.arange(1, 65)) <= 1e-12)


def test_two_point_attractive_to_twenty():
    assert check_attractivity(PotentialLaw.two_point(0, 1, 0.5), 20).ok


@settings(max_examples=60, deadline=None)
@given(v0=st.floats(0, 2), gap=st.floats(0.01, 3), p=st.floats(0.05, 0.95), beta=st.floats(0.05, 3))
def test_phi_subadditive_random_two_point(v0, gap, p, beta):
    law = PotentialLaw.two_point(v0, v0 + gap, p, beta=beta)
    phi = phi_table(law, 24)
    for a in range(1, 13):
        for b in range(1, 13):
            assert phi[a + b] <= phi[a] + phi[b] + 1e-12


def test_sampling_is_reproducible():
    law = law_preset("two-point")
    a = sample_environment(law, *centered_box(2, 6), seed=5).box(*centered_box(2, 6))
    b = sample_environment(law, *centered_box(2, 6), seed=5).box(*centered_box(2, 6))
    assert np.array_equal(a, b)


def test_lazy_and_materialized_agree():
    law = law_preset("exponential")
    lo, hi = centered_box(2, 4)
    mat = sample_environment(law, lo, hi, seed=2)
    lazy = sample_environment(law, lo, hi, seed=2, materialize=False)
    sites = np.array([[0, 0], [3, -4], [-2, 1]])
    assert np.array_equal(mat.value_at(sites), lazy.value_at(sites))


@pytest.mark.parametrize("law", [PotentialLaw.two_point(0, 1, 0.5), PotentialLaw.exponential(1.0, 0.7)])
def test_empirical_weight_mean(law):
    env = sample_environment(law, (0,), (99999,), seed=17)
    w = np.exp(law.log_weight(env.box((0,), (99999,))))
    assert abs(w.mean() - np.exp(-phi_beta(law, 1))) <= 4 * w.std(ddof=1) / np.sqrt(w.size)
