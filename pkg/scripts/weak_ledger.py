"""Fluctuation ledger and mixingale second moments in weak disorder.

    python3 scripts/weak_ledger.py --seeds 200 --n 30
"""
import argparse

import numpy as np

from polyrenewal.decomposition import polymer_geometry
from polyrenewal.disorder import basic_quenched, mixingale_diagnostics, piece_catalogue, fluctuation_ledger
from polyrenewal.environment import PotentialLaw
from polyrenewal.lattice import simple_random_walk
from polyrenewal.partition import AnnealedTable


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--beta", type=float, default=0.2)
    ap.add_argument("--h", type=float, nargs=2, default=[1.0, 0.0])
    ap.add_argument("--seeds", type=int, default=200)
    ap.add_argument("--n", type=int, default=30)
    ap.add_argument("--piece-cap", type=int, default=8)
    args = ap.parse_args()
    steps = simple_random_walk(2)
    law = PotentialLaw.two_point(0.0, 1.0, 0.5, beta=args.beta)
    geom = polymer_geometry(AnnealedTable(steps, law, 12), args.h)
    cat = piece_catalogue(geom, steps, law, args.piece_cap)
    lam = cat.truncated_lambda(geom.h)
    leds = [fluctuation_ledger(basic_quenched(cat, geom.h, lam, args.n, s)) for s in range(args.seeds)]
    Y = np.array([led.Y for led in leds])
    print(f"truncated lambda {lam:.6f}; max residual {max(l.residual.max() for l in leds):.2e}")
    print(f"{'n':>3} {'mean Y':>10} {'stderr':>9}")
    for n in range(0, args.n + 1, 5):
        print(f"{n:3d} {Y[:, n].mean():10.5f} {Y[:, n].std(ddof=1) / np.sqrt(args.seeds):9.5f}")
    rep = mixingale_diagnostics(cat, geom.h, lam, 6, [0, 1, 2, 3, 4], seeds=60, resamples=16)
    print("\nlag  E[(E[Y|F])^2]  stderr")
    for lag, m, se in zip([0, 1, 2, 3, 4], rep.second_moment, rep.stderr):
        print(f"{lag:3d}  {m:12.3e}  {se:.1e}")


if __name__ == "__main__":
    main()
