"""Quenched-to-annealed log ratio and fractional moments for a trap environment.

    python3 scripts/strong_disorder.py --seeds 1000 --ladder 4 8 12 --alphas 0.25 0.5 0.75 1
"""
import argparse

from polyrenewal.decomposition import polymer_geometry
from polyrenewal.disorder import fractional_moment_experiment, piece_catalogue, strong_disorder_ratio
from polyrenewal.environment import law_preset
from polyrenewal.lattice import simple_random_walk
from polyrenewal.partition import AnnealedTable, PolymerModel


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--law", default="traps-0.6")
    ap.add_argument("--h", type=float, nargs=2, default=[1.5, 0.0])
    ap.add_argument("--ladder", type=int, nargs="+", default=[4, 8, 12])
    ap.add_argument("--seeds", type=int, default=1000)
    ap.add_argument("--alphas", type=float, nargs="+", default=[0.25, 0.5, 0.75, 1.0])
    ap.add_argument("--pieces", type=int, default=4)
    ap.add_argument("--threads", type=int, default=1)
    args = ap.parse_args()
    steps, law = simple_random_walk(2), law_preset(args.law)
    model = PolymerModel(steps, law, h=args.h)
    table = AnnealedTable(steps, law, max(12, max(args.ladder)))
    rep = strong_disorder_ratio(model, args.ladder, args.seeds, 0, args.threads, table)
    print(f"{'n':>3} {'median':>9} {'upper99':>9} {'mean Z/EZ':>10} {'stderr':>8}")
    for row in zip(rep.n, rep.median, rep.median_upper, rep.mean_ratio, rep.mean_ratio_stderr):
        print("{:3d} {:9.4f} {:9.4f} {:10.4f} {:8.4f}".format(*row))
    geom = polymer_geometry(table, args.h)
    cat = piece_catalogue(geom, steps, law, 8)
    print(f"\n{'alpha':>6} {'E[Z^a]':>9} {'stderr':>8} {'annealed^a':>10}")
    for a in args.alphas:
        fm = fractional_moment_experiment(cat, geom.h, geom.lam, args.pieces, a, args.seeds, 0, args.threads)
        print(f"{a:6.2f} {fm.mean_moment:9.4f} {fm.stderr:8.4f} {fm.annealed_value ** a:10.4f}")


if __name__ == "__main__":
    main()
