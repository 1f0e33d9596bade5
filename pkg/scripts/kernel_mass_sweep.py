"""Irreducible-kernel mass and velocity against drift and enumeration depth.

    python3 scripts/kernel_mass_sweep.py --law traps-0.8 --drifts 0.8 1.2 2 3 --caps 8 10 12 14
"""
import argparse

from polyrenewal.decomposition import estimate_irreducible_kernel, polymer_geometry
from polyrenewal.environment import law_preset
from polyrenewal.lattice import simple_random_walk
from polyrenewal.partition import AnnealedTable


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--law", default="traps-0.8")
    ap.add_argument("--drifts", type=float, nargs="+", default=[0.8, 1.2, 2.0, 2.5, 3.0])
    ap.add_argument("--caps", type=int, nargs="+", default=[8, 10, 12, 14])
    ap.add_argument("--table-n", type=int, default=12)
    args = ap.parse_args()
    steps, law = simple_random_walk(2), law_preset(args.law)
    table = AnnealedTable(steps, law, max(args.table_n, max(args.caps)))
    print(f"{'h1':>5} {'lambda':>8} {'cap':>4} {'mass':>8} {'v_kernel':>9} {'v_direct':>9}")
    for h1 in args.drifts:
        geom = polymer_geometry(table, [h1, 0.0])
        for cap in args.caps:
            est = estimate_irreducible_kernel(geom, steps, law, cap)
            direct = table.mean_displacement(geom.h, cap)[0] / cap
            print(f"{h1:5.2f} {geom.lam:8.4f} {cap:4d} {est.mass:8.4f} "
                  f"{est.kernel.velocity()[0]:9.4f} {direct:9.4f}")


if __name__ == "__main__":
    main()
