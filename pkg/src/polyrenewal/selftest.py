"""Fast oracle checks run by ``polyrenewal selftest``."""
from __future__ import annotations

from typing import Callable

import numpy as np

from .decomposition import (annealed_log_weight, cone_points, cone_points_reference,
                            euclidean_geometry, factorization_gap, irreducible_split,
                            polymer_geometry)
from .disorder import TiltedEnvironment, piece_catalogue, basic_quenched, fluctuation_ledger
from .environment import PotentialLaw, centered_box, law_preset, sample_environment
from .geometry import (ConvexGridFunction, euclidean_tau, legendre_fenchel,
                       tau_curvature)
from .lattice import LatticePath, simple_random_walk
from .partition import (AnnealedTable, PolymerModel, annealed_partition_exact,
                        quenched_partition, quenched_partition_bruteforce)
from .renewal import (centered_moment_hessian, finite_difference_hessian, preset_kernel,
                      renewal_1d, renewal_multid, solve_shape_point, verify_local_clt)


def _annealed_z3() -> bool:
    model = PolymerModel(simple_random_walk(1), law_preset("traps-half"))
    return abs(np.exp(annealed_partition_exact(model, 3).log_z) - 0.1875) < 1e-14


def _quenched_vs_enumeration() -> bool:
    ok = True
    for d in (1, 2):
        model = PolymerModel(simple_random_walk(d), law_preset("two-point"), h=[0.3] + [0.0] * (d - 1))
        for seed in range(3):
            env = sample_environment(model.law, *centered_box(d, 6), seed=seed)
            a = quenched_partition(model, env, 6).log_z
            b = quenched_partition_bruteforce(model, env, 6)
            ok &= abs(a - b) <= 1e-10 * max(1.0, abs(b))
    return ok


def _table_vs_enumeration() -> bool:
    model = PolymerModel(simple_random_walk(2), law_preset("traps-0.7"), h=[0.4, -0.2])
    tab = AnnealedTable(model.steps, model.law, 6)
    return abs(tab.log_z(model.drift)[6] - annealed_partition_exact(model, 6).log_z) < 1e-11


def _renewal_geometric() -> bool:
    f = preset_kernel("geometric")
    t = renewal_1d(f.time_marginal(), 60)
    return bool(np.abs(t[1:] - 1 / f.mean_time()).max() <= 1e-12)


def _shape_log_cosh() -> bool:
    f = preset_kernel("srw1d")
    xs = np.linspace(-1, 1, 21)
    return max(abs(solve_shape_point(f, [x]).lam - np.log(np.cosh(x))) for x in xs) < 1e-10


def _hessian_routes() -> bool:
    f = preset_kernel("geometric-pm1")
    a = solve_shape_point(f, [0.0]).hess
    b = centered_moment_hessian(f)
    c = finite_difference_hessian(f)
    return bool(np.allclose(a, b, rtol=1e-6) and np.allclose(a, c, rtol=1e-6))


def _local_clt() -> bool:
    f = preset_kernel("srw1d")
    arr = renewal_multid(f, 200, keep=[200])
    rep = verify_local_clt(arr, [0.0], [[1.0]], [200])
    return rep.max_deviation[0] <= 0.05


def _legendre_quadratic() -> bool:
    axes = [np.linspace(-4, 4, 161)]
    f = ConvexGridFunction.from_function(lambda h: 0.5 * h[..., 0] ** 2, axes)
    g = legendre_fenchel(f, [np.linspace(-2, 2, 41)])
    x = np.linspace(-2, 2, 41)
    return bool(np.abs(g.values - 0.5 * x ** 2).max() < 1e-9)


def _circle_curvature() -> bool:
    tau = lambda x: 2.0 * euclidean_tau(x)
    return all(abs(tau_curvature(tau, th) - 2.0) < 1e-6 for th in (0.0, 0.7, 2.0))


def _cone_points_sweep() -> bool:
    geom = euclidean_geometry([1.0, 0.0])
    rng = np.random.default_rng(0)
    moves = np.array([[1, 0], [0, 1], [0, -1], [-1, 0]])
    for _ in range(200):
        path = LatticePath.from_steps(moves[rng.choice(4, 40, p=[0.55, 0.15, 0.15, 0.15])])
        if not np.array_equal(cone_points(geom, path), cone_points_reference(geom, path)):
            return False
    return True


def _factorization() -> bool:
    geom = euclidean_geometry([1.0, 0.0])
    steps = simple_random_walk(2)
    law = law_preset("traps-0.8")
    rng = np.random.default_rng(1)
    moves = steps.steps
    for _ in range(100):
        path = LatticePath.from_steps(moves[rng.choice(4, 30)])
        split = irreducible_split(geom, path, strict=False)
        gap = factorization_gap(split, lambda p: annealed_log_weight(law, p, steps, geom.h, 0.3))
        if abs(gap) > 1e-10:
            return False
    return True


def _ledger_identity() -> bool:
    steps = simple_random_walk(2)
    law = PotentialLaw.two_point(0.0, 1.0, 0.5, beta=0.2)
    tab = AnnealedTable(steps, law, 8)
    geom = polymer_geometry(tab, [1.0, 0.0], n_dirs=180)
    cat = piece_catalogue(geom, steps, law, 6)
    lam = cat.truncated_lambda(geom.h)
    led = fluctuation_ledger(basic_quenched(cat, geom.h, lam, 12, seed=3))
    return bool(led.residual.max() <= 1e-10)


def _trap_tilt() -> bool:
    p, dl = 0.7, 0.1
    return abs(TiltedEnvironment(PotentialLaw.pure_traps(p), dl).g - np.log(p + (1 - p) * np.exp(dl))) < 1e-14


CHECKS: dict[str, Callable[[], bool]] = {
    "annealed_z3_traps_half": _annealed_z3,
    "quenched_dp_vs_enumeration": _quenched_vs_enumeration,
    "annealed_table_vs_enumeration": _table_vs_enumeration,
    "renewal_geometric_exact": _renewal_geometric,
    "shape_log_cosh": _shape_log_cosh,
    "hessian_three_routes": _hessian_routes,
    "local_clt_binomial": _local_clt,
    "legendre_quadratic": _legendre_quadratic,
    "circle_curvature": _circle_curvature,
    "cone_point_sweep": _cone_points_sweep,
    "piece_factorization": _factorization,
    "ledger_identity": _ledger_identity,
    "trap_tilt_closed_form": _trap_tilt,
}


def run_selftest() -> dict[str, bool]:
    out = {}
    for name, check in CHECKS.items():
        try:
            out[name] = bool(check())
        except Exception:  # a crashing check is a failing check
            out[name] = False
    return out
