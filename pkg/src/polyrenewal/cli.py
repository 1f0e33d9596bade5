"""Command line entry point: ``polyrenewal <subcommand> [options]``."""
from __future__ import annotations

import csv
import json
import math
import os
import sys

import click
import numpy as np

from . import __version__
from .config import ExperimentConfig, apply_model_preset
from .decomposition import estimate_irreducible_kernel, polymer_geometry
from .disorder import (basic_quenched, fractional_moment_experiment, piece_catalogue,
                       fluctuation_ledger, strong_disorder_ratio)
from .environment import law_preset, sample_environment
from .errors import ConfigInvalid, PolyRenewalError, SubcommandUnknown
from .geometry import strict_triangle_constant, tau_curvature
from .lattice import enumeration_cost, step_preset
from .partition import (AnnealedTable, PolymerModel, annealed_partition_exact,
                        annealed_partition_mc, quenched_partition,
                        quenched_partition_bruteforce)
from .renewal import preset_kernel, renewal_1d, renewal_limit_rate, solve_shape_point
from .seeds import derive_seed, pmap
from .selftest import run_selftest

SUBCOMMANDS = ("quenched", "annealed", "renewal", "decompose", "geometry",
               "weak-disorder", "strong-disorder", "selftest")
EXIT_OK, EXIT_CHECK, EXIT_USAGE = 0, 1, 2


# -- plumbing ------------------------------------------------------------------

def _plain(x):
    if isinstance(x, dict):
        return {str(k): _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple, np.ndarray)):
        return [_plain(v) for v in x]
    if isinstance(x, (np.bool_, bool)):
        return bool(x)
    if isinstance(x, (np.integer, int)):
        return int(x)
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if math.isfinite(x) else repr(x)
    return x


def _cell(v):
    v = _plain(v)
    return repr(v) if isinstance(v, float) else v


def write_outputs(cfg: ExperimentConfig, command: str, summary: dict, tables: dict) -> str:
    out = cfg.run.out
    os.makedirs(out, exist_ok=True)
    doc = {"command": command, "config": cfg.to_dict(identity=True), "config_hash": cfg.digest(),
           "version": __version__, "summary": summary}
    with open(os.path.join(out, "summary.json"), "w") as fh:
        fh.write(json.dumps(_plain(doc), indent=2, sort_keys=True) + "\n")
    for name, rows in tables.items():
        if not rows:
            continue
        with open(os.path.join(out, f"{name}.csv"), "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(list(rows[0]))
            for row in rows:
                w.writerow([_cell(v) for v in row.values()])
    return out


def build_model(cfg: ExperimentConfig) -> PolymerModel:
    try:
        steps = step_preset(cfg.model.steps)
        law = law_preset(cfg.model.law)
    except KeyError as exc:
        raise ConfigInvalid(str(exc)) from exc
    if cfg.model.beta is not None:
        law = law.with_beta(cfg.model.beta)
    if len(cfg.model.h) != steps.dim:
        raise ConfigInvalid(f"model.h has {len(cfg.model.h)} entries for a {steps.dim}-dimensional walk")
    return PolymerModel(steps, law, cfg.model.h, cfg.model.lam or 0.0)


def _polymer_setup(cfg: ExperimentConfig, model: PolymerModel):
    table = AnnealedTable(model.steps, model.law, cfg.engine.table_n)
    geom = polymer_geometry(table, model.drift, cfg.model.lam, cfg.engine.deltas, cfg.engine.directions)
    return table, geom


class _Group(click.Group):
    def resolve_command(self, ctx, args):
        if args and args[0] not in self.commands and not args[0].startswith("-"):
            raise SubcommandUnknown(f"unknown subcommand {args[0]!r}; choose from {', '.join(SUBCOMMANDS)}")
        return super().resolve_command(ctx, args)


def _common(func):
    opts = [
        click.option("--config", "config_path", type=click.Path(dir_okay=False), default=None,
                     help="JSON experiment configuration."),
        click.option("--seed", type=int, default=None, help="Base seed."),
        click.option("--seeds", type=int, default=None, help="Number of environments."),
        click.option("--out", type=click.Path(file_okay=False), default=None, help="Output directory."),
        click.option("--threads", type=int, default=None, help="Worker processes."),
        click.option("--preset", default=None, help="Model preset (steps, law, drift)."),
        click.option("--set", "sets", multiple=True, metavar="BLOCK.KEY=VALUE",
                     help="Override any configuration key."),
    ]
    for opt in reversed(opts):
        func = opt(func)
    return func


def _load(config_path, seed, seeds, out, threads, preset, sets, **engine) -> ExperimentConfig:
    cfg = ExperimentConfig.load(config_path) if config_path else ExperimentConfig()
    cfg.apply_env()
    if preset:
        apply_model_preset(cfg, preset)
    for item in sets:
        if "=" not in item or "." not in item.split("=", 1)[0]:
            raise ConfigInvalid(f"override {item!r} is not BLOCK.KEY=VALUE")
        key, value = item.split("=", 1)
        block, name = key.split(".", 1)
        if block not in ("model", "engine", "run"):
            raise ConfigInvalid(f"unknown block {block!r}")
        cfg.set(block, name, json.loads(value) if value[:1] in "[{" else value)
    for key, value in (("seed", seed), ("seeds", seeds), ("out", out), ("threads", threads)):
        if value is not None:
            cfg.set("run", key, value)
    for key, value in engine.items():
        if value is not None:
            cfg.set("engine", key, value)
    return cfg


def _finish(cfg, command, summary, tables, ok: bool) -> None:
    summary["checks_passed"] = bool(ok)
    out = write_outputs(cfg, command, summary, tables)
    click.echo(f"{command}: {'ok' if ok else 'CHECK FAILED'} -> {out}")
    sys.exit(EXIT_OK if ok else EXIT_CHECK)


@click.group(cls=_Group)
@click.version_option(__version__)
def cli():
    """Directed polymers with attractive potentials: partition functions,
    renewal structure and disorder experiments."""


# -- subcommands ---------------------------------------------------------------

def _quenched_job(args):
    model, n, env_seed, check, cap = args
    r = n * model.steps.range
    env = sample_environment(model.law, (-r,) * model.dim, (r,) * model.dim, env_seed)
    lz = quenched_partition(model, env, n).log_z
    brute = quenched_partition_bruteforce(model, env, n, cap) if check else float("nan")
    return lz, brute


@cli.command()
@_common
@click.option("--n", type=int, default=None, help="Number of steps.")
def quenched(**kw):
    """Quenched log partition functions over environments."""
    cfg = _load(**kw)
    model = build_model(cfg)
    n = cfg.engine.n
    check = cfg.engine.exact and enumeration_cost(model.steps, n) <= cfg.engine.enumeration_cap
    seeds = [derive_seed(cfg.run.seed, i) for i in range(cfg.run.seeds)]
    res = pmap(_quenched_job, [(model, n, s, check, cfg.engine.enumeration_cap) for s in seeds],
               cfg.run.threads)
    rows, worst = [], 0.0
    for i, (s, (lz, brute)) in enumerate(zip(seeds, res)):
        gap = 0.0
        if check and math.isfinite(brute):
            gap = abs(lz - brute) / max(1.0, abs(brute))
        elif check and lz != brute:
            gap = math.inf
        worst = max(worst, gap)
        rows.append({"index": i, "env_seed": s, "log_z": lz, "log_z_enumerated": brute, "rel_gap": gap})
    finite = np.array([r["log_z"] for r in rows if math.isfinite(r["log_z"])])
    summary = {"n": n, "environments": len(rows), "finite": int(finite.size),
               "mean_log_z_per_step": float(finite.mean() / n) if finite.size else None,
               "enumeration_checked": bool(check), "max_rel_gap": worst}
    _finish(cfg, "quenched", summary, {"quenched": rows}, worst <= cfg.engine.tolerance)


@cli.command()
@_common
@click.option("--n", type=int, default=None, help="Number of steps.")
@click.option("--exact/--mc", default=None, help="Exact enumeration or Monte Carlo.")
@click.option("--chains", type=int, default=None, help="Monte Carlo chains.")
def annealed(**kw):
    """Annealed log partition function."""
    cfg = _load(**kw)
    model = build_model(cfg)
    n = cfg.engine.n
    ok = True
    if cfg.engine.exact:
        table = AnnealedTable(model.steps, model.law, n)
        lz = table.log_z(model.drift)
        rows = [{"n": m, "log_z": lz[m]} for m in range(n + 1)]
        summary = {"n": n, "log_z": lz[n], "z": math.exp(lz[n]), "method": "exact",
                   "lambda_estimate": table.lambda_estimate(model.drift) if n >= 2 else None}
        if enumeration_cost(model.steps, n) <= cfg.engine.enumeration_cap:
            enum = annealed_partition_exact(model, n).log_z
            summary["log_z_enumerated"] = enum
            ok = abs(enum - lz[n]) <= cfg.engine.tolerance * max(1.0, abs(enum))
    else:
        est = annealed_partition_mc(model, n, cfg.engine.chains, derive_seed(cfg.run.seed, n), resample=True)
        rows = [{"n": n, "z": est.mean, "stderr": est.stderr, "ess": est.ess}]
        summary = {"n": n, "z": est.mean, "stderr": est.stderr, "log_z": est.log_mean, "method": "mc"}
    click.echo(f"Z_{n} = {float(np.exp(summary['log_z']))!r}  log Z_{n} = {float(summary['log_z'])!r}")
    _finish(cfg, "annealed", summary, {"annealed": rows}, ok)


@cli.command()
@_common
@click.option("--kernel", default=None, help="Kernel preset.")
@click.option("--n", type=int, default=None, help="Horizon.")
def renewal(**kw):
    """Renewal sequence t(n) and its convergence to 1/mu."""
    cfg = _load(**kw)
    try:
        f = preset_kernel(cfg.engine.kernel)
    except KeyError as exc:
        raise ConfigInvalid(str(exc)) from exc
    n = cfg.engine.n
    t = renewal_1d(f.time_marginal(), n)
    mu = f.mean_time()
    rep = renewal_limit_rate(t, mu)
    sp = solve_shape_point(f, np.zeros(f.dim))
    rows = [{"n": m, "t": t[m], "deviation": abs(t[m] - 1 / mu)} for m in range(n + 1)]
    summary = {"kernel": cfg.engine.kernel, "n": n, "mu": mu, "sup_deviation": rep.sup_deviation,
               "decay_rate": rep.rate, "velocity": sp.grad, "diffusivity": sp.hess,
               "mass": f.mass}
    _finish(cfg, "renewal", summary, {"renewal": rows}, f.is_probability())


@cli.command()
@_common
@click.option("--piece-cap", type=int, default=None, help="Longest irreducible piece enumerated.")
def decompose(**kw):
    """Irreducible-piece kernel of the annealed polymer."""
    cfg = _load(**kw)
    model = build_model(cfg)
    _, geom = _polymer_setup(cfg, model)
    est = estimate_irreducible_kernel(geom, model.steps, model.law, cfg.engine.piece_cap)
    rows = [{"n": m, "mass": est.mass_by_length[m], "cumulative": est.cumulative_mass[m]}
            for m in range(len(est.mass_by_length))]
    summary = {"lambda": geom.lam, "mass": est.mass, "tail_rate": est.tail_rate,
               "velocity": est.kernel.velocity(), "pieces": est.tables.piece_count,
               "cone_edges": geom.sector_edges().tolist() if geom.d == 2 else None}
    os.makedirs(cfg.run.out, exist_ok=True)
    with open(os.path.join(cfg.run.out, "kernel.txt"), "w") as fh:
        fh.write(est.kernel.to_text())
    _finish(cfg, "decompose", summary, {"piece_mass": rows}, est.mass <= 1.0 + 1e-12)


@cli.command()
@_common
def geometry(**kw):
    """Inverse correlation length tau on rays and its curvature."""
    cfg = _load(**kw)
    model = build_model(cfg)
    if model.dim != 2:
        raise ConfigInvalid("geometry output is planar; use a two-dimensional model")
    _, geom = _polymer_setup(cfg, model)
    k = 72
    angles = 2 * np.pi * np.arange(k) / k
    dirs = np.column_stack([np.cos(angles), np.sin(angles)])
    tau = geom.tau(dirs)
    curv = [tau_curvature(geom.tau, a, step=2 * np.pi / 180) for a in angles]
    rows = [{"angle": a, "tau": t, "surcharge": s, "curvature_radius": c}
            for a, t, s, c in zip(angles, tau, geom.surcharge(dirs), curv)]
    rng = np.random.default_rng(derive_seed(cfg.run.seed, 7))
    pairs = rng.normal(size=(200, 2, 2))
    summary = {"lambda": geom.lam, "r_lambda": geom.r_lambda,
               "triangle_constant": strict_triangle_constant(geom.tau, pairs),
               "min_surcharge": float(geom.surcharge(dirs).min())}
    _finish(cfg, "geometry", summary, {"tau": rows}, summary["min_surcharge"] >= 0)


def _ledger_job(args):
    cat, h, lam, n, seed = args
    led = fluctuation_ledger(basic_quenched(cat, h, lam, n, seed))
    return led.rows()


@cli.command("weak-disorder")
@_common
@click.option("--n", type=int, default=None, help="Ledger horizon.")
def weak_disorder(**kw):
    """Fluctuation ledger of the quenched renewal array over environments."""
    cfg = _load(**kw)
    model = build_model(cfg)
    _, geom = _polymer_setup(cfg, model)
    cat = piece_catalogue(geom, model.steps, model.law, cfg.engine.piece_cap)
    lam = cat.truncated_lambda(model.drift)
    seeds = [derive_seed(cfg.run.seed, i) for i in range(cfg.run.seeds)]
    res = pmap(_ledger_job, [(cat, model.drift, lam, cfg.engine.n, s) for s in seeds], cfg.run.threads)
    rows = [{"env_seed": s, **r} for s, rr in zip(seeds, res) for r in rr]
    resid = max(r["residual"] for r in rows)
    Y = np.array([[r["Y"] for r in rr] for rr in res])
    summary = {"truncated_lambda": lam, "pieces": len(cat.lengths), "max_residual": resid,
               "Y_mean": Y.mean(axis=0), "Y_stderr": Y.std(axis=0, ddof=1) / np.sqrt(len(seeds))
               if len(seeds) > 1 else None}
    _finish(cfg, "weak-disorder", summary, {"ledger": rows}, resid <= cfg.engine.tolerance)


@cli.command("strong-disorder")
@_common
@click.option("--alpha", type=float, default=None, help="Fractional moment exponent.")
def strong_disorder(**kw):
    """Quenched-to-annealed ratio and the fractional-moment control."""
    cfg = _load(**kw)
    model = build_model(cfg)
    table, geom = _polymer_setup(cfg, model)
    rep = strong_disorder_ratio(model, cfg.engine.ladder, cfg.run.seeds, cfg.run.seed,
                                cfg.run.threads, table if table.n_max >= max(cfg.engine.ladder) else None)
    cat = piece_catalogue(geom, model.steps, model.law, cfg.engine.piece_cap)
    control = fractional_moment_experiment(cat, model.drift, geom.lam, cfg.engine.pieces, 1.0,
                                           cfg.run.seeds, cfg.run.seed, cfg.run.threads)
    frac = fractional_moment_experiment(cat, model.drift, geom.lam, cfg.engine.pieces, cfg.engine.alpha,
                                        cfg.run.seeds, cfg.run.seed, cfg.run.threads)
    rows = [{"n": n, "q05": q[0], "q25": q[1], "median": q[2], "q75": q[3], "q95": q[4],
             "median_upper_99": u} for n, q, u in zip(rep.n, rep.quantiles, rep.median_upper)]
    control_gap = abs(control.mean_moment - control.annealed_value)
    ok = rep.median_upper[-1] < 0 and control_gap <= 3 * control.stderr
    summary = {"ratio": rep.to_dict(), "alpha_one_control": control.to_dict(),
               "fractional_moment": frac.to_dict()}
    _finish(cfg, "strong-disorder", summary, {"log_ratio_quantiles": rows}, ok)


@cli.command()
@_common
def selftest(**kw):
    """Fast oracle checks; prints a pass matrix."""
    cfg = _load(**kw)
    res = run_selftest()
    width = max(len(k) for k in res)
    for name, ok in res.items():
        click.echo(f"{name:<{width}}  {'PASS' if ok else 'FAIL'}")
    rows = [{"check": k, "passed": v} for k, v in res.items()]
    _finish(cfg, "selftest", {"results": res}, {"selftest": rows}, all(res.values()))


# -- entry points --------------------------------------------------------------

def main(argv=None) -> int:
    try:
        cli.main(args=argv, prog_name="polyrenewal", standalone_mode=False)
    except SystemExit as exc:
        return int(exc.code or 0)
    except (ConfigInvalid, SubcommandUnknown, click.UsageError) as exc:
        click.echo(f"error: {exc}", err=True)
        return EXIT_USAGE
    except click.exceptions.Exit as exc:
        return exc.exit_code
    except click.Abort:
        return EXIT_USAGE
    except PolyRenewalError as exc:
        click.echo(f"error: {type(exc).__name__}: {exc}", err=True)
        return EXIT_CHECK
    return EXIT_OK


def run(subcommand: str, config_path: str | None = None, overrides: list[str] | None = None,
        extra: list[str] | None = None) -> int:
    """Programmatic form of the command line."""
    if subcommand not in SUBCOMMANDS:
        raise SubcommandUnknown(f"unknown subcommand {subcommand!r}")
    argv = [subcommand]
    if config_path:
        argv += ["--config", config_path]
    for item in overrides or []:
        argv += ["--set", item]
    return main(argv + list(extra or []))


if __name__ == "__main__":
    sys.exit(main())
