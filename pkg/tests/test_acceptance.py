"""End-to-end acceptance checks; each prints one PASS/FAIL line.

Run alone with ``python3 tests/test_acceptance.py`` or as part of pytest.
"""
import math
import sys

import numpy as np
import pytest
from scipy.stats import binom

from polyrenewal.cli import _polymer_setup, build_model, main
from polyrenewal.config import ExperimentConfig, apply_model_preset
from polyrenewal.decomposition import (annealed_log_weight, cone_points, estimate_irreducible_kernel,
                                       factorization_gap, irreducible_split)
from polyrenewal.disorder import (basic_quenched, fractional_moment_experiment, piece_catalogue,
                                  fluctuation_ledger, strong_disorder_ratio)
from polyrenewal.environment import PotentialLaw, centered_box, law_preset, sample_environment
from polyrenewal.geometry import (ConvexBody, ConvexGridFunction, ellipse_tau, euclidean_tau,
                                  hausdorff_support, hessian_tau, legendre_fenchel, polar,
                                  tau_curvature)
from polyrenewal.lattice import LatticePath, enumerate_path_array, simple_random_walk
from polyrenewal.partition import (AnnealedTable, PolymerModel, quenched_partition,
                                   quenched_partition_bruteforce)
from polyrenewal.renewal import (centered_moment_hessian, finite_difference_hessian, local_ld,
                                 preset_kernel, renewal_1d, renewal_limit_rate, renewal_multid,
                                 solve_shape_point, verify_local_clt)
from polyrenewal.seeds import derive_seed

SRW = {1: simple_random_walk(1), 2: simple_random_walk(2)}


def _verdict(record_property, tag, ok, detail):
    line = f"{tag} {'PASS' if ok else 'FAIL'}  {detail}"
    print(line)
    record_property("acceptance", line)
    assert ok, line


def _preset(name):
    cfg = ExperimentConfig()
    apply_model_preset(cfg, name)
    return cfg, build_model(cfg)


def test_c1_quenched_dp_matches_enumeration(record_property):
    worst, cases = 0.0, 0
    for d in (1, 2):
        for law in (law_preset("traps-0.7"), law_preset("two-point")):
            model = PolymerModel(SRW[d], law, h=[0.3] + [-0.1] * (d - 1))
            for e in range(25):
                env = sample_environment(law, *centered_box(d, 8), seed=derive_seed(1, d, e))
                for n in range(9):
                    a = quenched_partition(model, env, n).log_z
                    b = quenched_partition_bruteforce(model, env, n)
                    gap = 0.0 if a == b else abs(a - b) / max(1.0, abs(b))
                    worst = max(worst, gap)
                    cases += 1
    _verdict(record_property, "C1", worst <= 1e-10,
             f"quenched DP vs enumeration: {cases} cases, max log-relative gap {worst:.2e}")


def test_c2_environment_average_is_annealed(record_property):
    seeds, n_max = 10_000, 10
    worst_z, lines = 0.0, []
    for name in ("weak-2d", "strong-2d"):
        _, model = _preset(name)
        ann = np.exp(AnnealedTable(model.steps, model.law, n_max).log_z(model.drift))
        z = np.empty((seeds, n_max + 1))
        for s in range(seeds):
            env = sample_environment(model.law, *centered_box(2, n_max), seed=derive_seed(2, s))
            z[s] = [np.exp(quenched_partition(model, env, n).log_z) for n in range(n_max + 1)]
        se = z.std(axis=0, ddof=1) / math.sqrt(seeds)
        zs = np.abs(z.mean(axis=0)[1:] - ann[1:]) / se[1:]
        worst_z = max(worst_z, zs.max())
        lines.append(f"{name} max |z| {zs.max():.2f}")
    _verdict(record_property, "C2", worst_z <= 4,
             f"E_env Z^w_n = Z_n, n<=10, 1e4 seeds: {'; '.join(lines)} (limit 4)")


def test_c3_renewal_limit(record_property):
    geo = preset_kernel("geometric")
    t = renewal_1d(geo.time_marginal(), 200)
    sup = np.abs(t[1:] - 1 / geo.mean_time()).max()
    rep = renewal_limit_rate(renewal_1d([0, 0.5, 0.5], 40), 1.5)
    rel = abs(rep.rate - math.log(2)) / math.log(2)
    _verdict(record_property, "C3", sup <= 1e-12 and rel <= 0.1,
             f"geometric sup|t-1/mu| {sup:.1e}; (1/2,1/2) decay rate {rep.rate:.4f} vs log 2 ({rel:.1%})")


def test_c4_shape_solver(record_property):
    f = preset_kernel("srw1d")
    lam_err = max(abs(solve_shape_point(f, [xi]).lam - math.log(math.cosh(xi)))
                  for xi in np.linspace(-1, 1, 41))
    hess_err = 0.0
    for name in ("srw1d", "srw2d", "geometric-pm1"):
        k = preset_kernel(name)
        a = solve_shape_point(k, np.zeros(k.dim)).hess
        scale = np.abs(a).max()
        for b in (centered_moment_hessian(k), finite_difference_hessian(k)):
            hess_err = max(hess_err, np.abs(a - b).max() / scale)
    _verdict(record_property, "C4", lam_err <= 1e-10 and hess_err <= 1e-6,
             f"log cosh error {lam_err:.1e}; Xi(0) three-route relative gap {hess_err:.1e}")


def test_c5_local_clt(record_property):
    arr = renewal_multid(preset_kernel("srw1d"), 200, keep=[200])
    dev = verify_local_clt(arr, [0.0], [[1.0]], [200]).max_deviation[0]
    _verdict(record_property, "C5", dev <= 0.05, f"+-1 kernel n=200 max relative deviation {dev:.4f}")


def test_c6_local_large_deviations(record_property):
    f = preset_kernel("srw1d")
    arr = renewal_multid(f, 200, keep=[200])
    rep = local_ld(f, arr, [0.5], 200)
    closed = 0.75 * math.log(1.5) + 0.25 * math.log(0.5)
    point = binom.pmf(150, 200, 0.5)
    ok = abs(rep.J - closed) <= 1e-6 and rep.relative_error <= 0.05 and abs(rep.observed - point) <= 1e-15
    _verdict(record_property, "C6", ok,
             f"J(0.5) error {abs(rep.J - closed):.1e}; point-mass relative error {rep.relative_error:.4f}")


def test_c7_decomposition_factorization(record_property):
    cfg, model = _preset("supercritical-2d")
    _, geom = _polymer_setup(cfg, model)
    law, steps = model.law, model.steps

    def logw(p):
        return annealed_log_weight(law, p, steps, geom.h, geom.lam)

    worst, count = 0.0, 0
    for n in range(2, 11):
        verts, _ = enumerate_path_array(steps, n, cap=2 * 10**7)
        V = verts.astype(float)
        inner = V[:, 1:-1, :]
        # a cone point needs the endpoints in its backward and forward cones
        cand = np.any(geom.in_cone(inner - V[:, :1, :]) & geom.in_cone(V[:, -1:, :] - inner), axis=1)
        for v in verts[cand]:
            path = LatticePath(v)
            if not len(cone_points(geom, path)):
                continue
            gap = abs(factorization_gap(irreducible_split(geom, path), logw))
            worst = max(worst, gap / max(1.0, abs(logw(path))))
            count += 1
    rng = np.random.default_rng(derive_seed(7))
    tilt = steps.probs * np.exp(steps.steps @ geom.h)
    tilt /= tilt.sum()
    recon = sampled = 0
    while sampled < 1000:
        path = LatticePath.from_steps(steps.steps[rng.choice(len(tilt), 60, p=tilt)])
        if len(cone_points(geom, path)):
            recon += irreducible_split(geom, path).reconcatenate().as_tuples() == path.as_tuples()
            sampled += 1
    _verdict(record_property, "C7", worst <= 1e-12 and recon == 1000 and count > 0,
             f"{count} decomposable paths n<=10, max log-relative gap {worst:.1e}; "
             f"re-concatenation {recon}/1000")


def test_c8_irreducible_kernel_mass(record_property):
    cfg, model = _preset("supercritical-2d")
    _, geom = _polymer_setup(cfg, model)
    masses = [estimate_irreducible_kernel(geom, model.steps, model.law, m).mass for m in (10, 12, 14)]
    cfg.model.h = [1.2, 0.0]
    _, g12 = _polymer_setup(cfg, build_model(cfg))
    diag = estimate_irreducible_kernel(g12, model.steps, model.law, 14).mass
    ok = masses[2] >= 0.9 and masses[0] < masses[1] < masses[2]
    _verdict(record_property, "C8", ok,
             f"mass at n_max 10/12/14: {masses[0]:.4f}/{masses[1]:.4f}/{masses[2]:.4f}; "
             f"diagnostic h=(1.2,0) at 14: {diag:.4f}")


def test_c9_superadditivity_and_convexity(record_property):
    grid = np.linspace(-1.0, 1.0, 5)
    drifts = np.array([[a, b] for a in grid for b in grid])
    worst_sup, worst_zero, worst_cvx = -np.inf, -np.inf, -np.inf
    for law in (law_preset("traps-0.8"), PotentialLaw.two_point(0.0, 1.0, 0.5, beta=0.2)):
        tab = AnnealedTable(SRW[2], law, 12)
        lz = {tuple(h): tab.log_z(h) for h in drifts}
        for row in lz.values():
            for n in range(1, 12):
                for m in range(1, 13 - n):
                    worst_sup = max(worst_sup, row[n] + row[m] - row[n + m])
        worst_zero = max(worst_zero, tab.log_z([0.0, 0.0])[1:].max())
        for i, a in enumerate(drifts):
            for b in drifts[i + 1:]:
                mid = tuple((a + b) / 2)
                if mid not in lz:
                    continue
                for n in range(1, 13):
                    gap = lz[mid][n] / n - 0.5 * (lz[tuple(a)][n] + lz[tuple(b)][n]) / n
                    worst_cvx = max(worst_cvx, gap)
    ok = worst_sup <= 1e-12 and worst_zero <= 1e-15 and worst_cvx <= 1e-12
    _verdict(record_property, "C9", ok,
             f"max log(Z_n Z_m / Z_n+m) {worst_sup:.2e}; max log Z_n(0) {worst_zero:.2e}; "
             f"max midpoint excess {worst_cvx:.2e}")


def test_c10_geometry_suite(record_property):
    ax = np.linspace(-3, 3, 241)
    spacing = ax[1] - ax[0]
    dual = np.linspace(-2.5, 2.5, 201)
    lf_worst = 0.0
    for seed in range(20):
        rng = np.random.default_rng(seed)
        slopes, icpts = rng.uniform(-2, 2, 5), rng.uniform(-1, 1, 5)
        vals = np.max(slopes[:, None] * ax[None, :] + icpts[:, None], axis=0)
        back = legendre_fenchel(legendre_fenchel(ConvexGridFunction([ax], vals), [dual]), [ax])
        lf_worst = max(lf_worst, np.abs(back.values - vals).max() / (2 * spacing * 2.0))
    rho = 2.5
    curv = max(abs(tau_curvature(lambda x: rho * euclidean_tau(x), th) - rho)
               for th in np.linspace(0, 2 * np.pi, 13))
    ball = ConvexBody.ball(2, 1.0, 720)
    ang = 2 * np.pi / 720
    pol = hausdorff_support(polar(polar(ball)), ball)
    rad = 0.0
    rng = np.random.default_rng(5)
    for tau in (ellipse_tau(2.0, 0.7), euclidean_tau):
        for x in rng.normal(size=(20, 2)):
            H = hessian_tau(tau, x)
            rad = max(rad, np.abs(H @ x).max() / (1e-5 * np.abs(H).max() + 1e-7))
    ok = lf_worst <= 1 and curv <= 1e-6 and pol <= 2 * ang and rad <= 1
    _verdict(record_property, "C10", ok,
             f"LF involution {lf_worst:.2f} of tolerance; circle curvature error {curv:.1e}; "
             f"polar involution {pol:.1e} (limit {2 * ang:.1e}); |Xi x| {rad:.2f} of stencil tolerance")


def test_c11_fluctuation_ledger(record_property):
    cfg, model = _preset("weak-2d")
    _, geom = _polymer_setup(cfg, model)
    cat = piece_catalogue(geom, model.steps, model.law, cfg.engine.piece_cap)
    lam = cat.truncated_lambda(model.drift)
    worst = max(fluctuation_ledger(basic_quenched(cat, model.drift, lam, 30, derive_seed(11, s))).residual.max()
                for s in range(100))
    _verdict(record_property, "C11", worst <= 1e-10,
             f"ledger residual over 100 seeds, n<=30: max {worst:.1e}")


def test_c12_strong_disorder_sign(record_property):
    cfg, model = _preset("strong-2d")
    table, geom = _polymer_setup(cfg, model)
    rep = strong_disorder_ratio(model, [4, 8, 12], 1000, derive_seed(12), 1, table)
    cat = piece_catalogue(geom, model.steps, model.law, cfg.engine.piece_cap)
    ctl = fractional_moment_experiment(cat, model.drift, geom.lam, cfg.engine.pieces, 1.0, 1000,
                                       derive_seed(12))
    gap = abs(ctl.mean_moment - ctl.annealed_value)
    ok = rep.median_upper[-1] < 0 and gap <= 3 * ctl.stderr
    _verdict(record_property, "C12", ok,
             f"n=12 median {rep.median[-1]:.4f}, 99% upper bound {rep.median_upper[-1]:.4f}; "
             f"alpha=1 control {ctl.mean_moment:.4f} vs {ctl.annealed_value:.4f} "
             f"({gap / ctl.stderr:.2f} stderr)")


EXPERIMENTS = [
    ["quenched", "--preset", "weak-2d", "--n", "6", "--seeds", "16"],
    ["annealed", "--preset", "supercritical-2d", "--mc", "--n", "8", "--chains", "4000"],
    ["weak-disorder", "--preset", "weak-2d", "--n", "20", "--seeds", "16"],
    ["strong-disorder", "--preset", "strong-2d", "--seeds", "40"],
    ["decompose", "--preset", "supercritical-2d", "--piece-cap", "10"],
    ["renewal", "--kernel", "geometric-pm1", "--n", "60"],
]


def test_c13_determinism_across_workers(record_property, tmp_path):
    mismatched, files = [], 0
    for k, args in enumerate(EXPERIMENTS):
        outs = []
        for threads in (1, 8):
            out = tmp_path / f"{k}-{threads}"
            main(args + ["--seed", "5", "--threads", str(threads), "--out", str(out)])
            outs.append({p.name: p.read_bytes() for p in sorted(out.iterdir())})
        files += len(outs[0])
        if outs[0] != outs[1] or not outs[0]:
            mismatched.append(args[0])
    _verdict(record_property, "C13", not mismatched,
             f"{len(EXPERIMENTS)} experiments, {files} files byte-compared across 1 and 8 workers; "
             f"mismatched: {mismatched or 'none'}")


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q"]))
