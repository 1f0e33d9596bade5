import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from polyrenewal.errors import AllInfinite, OriginNotInterior, TableTooCoarse
from polyrenewal.geometry import (ConvexBody, ConvexGridFunction, TauTable, convex_envelope,
                                  ellipse_tau, euclidean_tau, hausdorff_support, hessian_tau,
                                  legendre_fenchel, minkowski, polar, quadratic_expansion_check,
                                  rate_functions, strict_triangle_constant, support_function,
                                  tau_curvature)

AX = np.linspace(-3, 3, 241)
SPACING = AX[1] - AX[0]


def test_quadratic_is_self_dual():
    f = ConvexGridFunction.from_function(lambda h: 0.5 * h[..., 0] ** 2, [AX])
    x = np.linspace(-2, 2, 81)
    g = legendre_fenchel(f, [x])
    assert np.abs(g.values - 0.5 * x ** 2).max() <= SPACING ** 2


def test_interval_indicator_conjugate():
    a = 1.25
    f = ConvexGridFunction([AX], np.where(np.abs(AX) <= a + 1e-12, 0.0, np.inf))
    x = np.linspace(-4, 4, 33)
    assert np.allclose(legendre_fenchel(f, [x]).values, a * np.abs(x), atol=1e-12)
    with pytest.raises(AllInfinite):
        legendre_fenchel(ConvexGridFunction([AX], np.full(AX.shape, np.inf)), [x])


def _random_convex(rng, k=5):
    slopes = rng.uniform(-2, 2, k)
    icpts = rng.uniform(-1, 1, k)
    return np.max(slopes[:, None] * AX[None, :] + icpts[:, None], axis=0), 2.0


@pytest.mark.parametrize("seed", range(20))
def test_double_conjugate_is_envelope(seed):
    rng = np.random.default_rng(seed)
    vals, lip = _random_convex(rng)
    f = ConvexGridFunction([AX], vals)
    dual = np.linspace(-2.5, 2.5, 201)
    back = legendre_fenchel(legendre_fenchel(f, [dual]), [AX])
    assert np.abs(back.values - vals).max() <= 2 * SPACING * lip
    fast = legendre_fenchel(f, [dual], fast=True)
    assert np.allclose(fast.values, legendre_fenchel(f, [dual]).values, atol=1e-12)


def test_envelope_of_nonconvex_function():
    vals = np.minimum((AX - 1) ** 2, (AX + 1) ** 2)
    env = convex_envelope(ConvexGridFunction([AX], vals))
    assert env.is_midpoint_convex()
    assert np.all(env.values <= vals + 1e-12)
    assert np.abs(env.values[np.abs(AX) <= 1]).max() <= 1e-12


def test_ball_and_cube():
    ball = ConvexBody.ball(2, 1.0, 720)
    tol = 1 - math.cos(math.pi / 720)
    rng = np.random.default_rng(0)
    for x in rng.normal(size=(50, 2)):
        assert abs(support_function(ball, x) - np.linalg.norm(x)) <= tol * np.linalg.norm(x)
        assert abs(minkowski(ball, x) - np.linalg.norm(x)) <= 2 * tol * np.linalg.norm(x)
    assert hausdorff_support(polar(ball), ball) <= 2 * tol
    cube = ConvexBody.cube(2)
    for x in rng.normal(size=(50, 2)):
        assert abs(support_function(cube, x) - np.abs(x).sum()) <= 1e-12
    cross = ConvexBody(np.array([[1, 0], [-1, 0], [0, 1], [0, -1]], dtype=float))
    assert hausdorff_support(polar(cube), cross) <= 1e-12


def test_duality_inequality_and_equality():
    cube = ConvexBody.cube(2)
    rng = np.random.default_rng(3)
    X, H = rng.normal(size=(1000, 2)), rng.normal(size=(1000, 2))
    for x, h in zip(X, H):
        assert x @ h <= support_function(cube, x) * minkowski(cube, h) + 1e-9
    x, h = np.array([1.0, 0.3]), np.array([1.0, 1.0])
    assert abs(x @ h - support_function(cube, x) * minkowski(cube, h)) <= 1e-9


def test_polar_requires_interior_origin():
    with pytest.raises(OriginNotInterior):
        polar(ConvexBody(np.array([[1.0, 1.0], [2.0, 1.0], [1.0, 2.0]])))


def test_curvature_closed_forms():
    rho = 2.5
    circle = lambda x: rho * euclidean_tau(x)
    for th in (0.0, 1.0, 2.5):
        assert abs(tau_curvature(circle, th) - rho) <= 1e-6
    a, b = 2.0, 0.7
    ell = ellipse_tau(a, b)
    assert abs(tau_curvature(ell, 0.0) - b * b / a) <= 1e-4
    angles = np.linspace(0, 2 * np.pi, 720, endpoint=False)
    table = TauTable(angles, np.array([ell(np.array([math.cos(t), math.sin(t)])) for t in angles]))
    assert abs(tau_curvature(table, 0.0) - b * b / a) <= 1e-3
    coarse = TauTable(angles[::40], table.values[::40])
    with pytest.raises(TableTooCoarse):
        tau_curvature(coarse, 0.0)


@pytest.mark.parametrize("tau", [ellipse_tau(2.0, 0.7), euclidean_tau])
def test_radial_hessian_annihilation(tau):
    rng = np.random.default_rng(5)
    for x in rng.normal(size=(20, 2)):
        H = hessian_tau(tau, x)
        assert np.abs(H @ x).max() <= 1e-5 * np.abs(H).max() + 1e-7


def test_three_dimensional_principal_radii():
    r = tau_curvature(lambda x: 3.0 * np.linalg.norm(x), np.array([0.3, -0.2, 0.9]))
    assert np.allclose(r, [3.0, 3.0], atol=1e-5)


def test_quadratic_expansion_euclidean():
    rep = quadratic_expansion_check(euclidean_tau, [100.0, 0.0], [1.0], 0.5)
    exact = 2 * math.sqrt(50 ** 2 + 1) - 100
    assert abs(rep["cost"] - exact) < 1e-9 and abs(rep["model"] - 0.02) < 1e-6
    assert abs(rep["residual"]) <= 0.02
    zero = quadratic_expansion_check(euclidean_tau, [100.0, 0.0], [0.0], 0.5)
    assert zero["cost"] == pytest.approx(0.0, abs=1e-12) and zero["model"] == 0.0


def test_strict_triangle_ellipse():
    pairs = np.random.default_rng(9).normal(size=(1000, 2, 2))
    assert strict_triangle_constant(ellipse_tau(2.0, 0.7), pairs) > 0


def test_rate_functions_log_cosh():
    axes = [np.linspace(-6, 6, 2401)]
    lam = ConvexGridFunction.from_function(lambda h: np.log(np.cosh(h[..., 0])), axes)
    v = np.linspace(-0.9, 0.9, 37)
    h = 0.6
    rf = rate_functions(lam, [h], [v])
    closed = (1 + v) / 2 * np.log(1 + v) + (1 - v) / 2 * np.log(1 - v)
    assert np.abs(rf.I.values - closed).max() <= 1e-3
    assert abs(rf.I_h_at_velocity) <= 1e-3
    assert abs(rf.velocity[0] - math.tanh(h)) <= 1e-3
    i0 = int(np.argmin(np.abs(v)))
    assert abs(rf.I_h.values[i0] - rf.lam_h) <= 1e-3
    for j in (3, 18, 30):
        assert abs(rf.I_h.values[j] - (rf.I.values[j] - (h * v[j] - rf.lam_h))) <= 1e-12


polytopes = st.lists(st.tuples(st.floats(-3, 3), st.floats(-3, 3)), min_size=3, max_size=10)


def _body(pts):
    pts = np.array(pts, dtype=float)
    square = np.array([[1, 1], [1, -1], [-1, 1], [-1, -1]], dtype=float) * 0.5
    return ConvexBody(np.vstack([pts, square]))


@settings(max_examples=60, deadline=None)
@given(polytopes, st.lists(st.floats(-5, 5), min_size=6, max_size=6), st.floats(0.01, 10))
def test_support_homogeneous_subadditive(pts, xs, c):
    K = _body(pts)
    x, y, z = np.array(xs[:2]), np.array(xs[2:4]), np.array(xs[4:])
    assert abs(support_function(K, c * x) - c * support_function(K, x)) <= 1e-9 * (1 + abs(c) * np.abs(x).sum())
    for a, b in ((x, y), (y, z), (x, z)):
        assert support_function(K, a + b) <= support_function(K, a) + support_function(K, b) + 1e-9


@settings(max_examples=40, deadline=None)
@given(polytopes)
def test_polar_involution(pts):
    K = _body(pts)
    assert hausdorff_support(polar(polar(K)), K) <= 1e-8 * (1 + np.abs(K.vertices).max())
