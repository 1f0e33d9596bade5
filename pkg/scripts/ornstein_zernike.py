"""Power-law prefactor of the killed Green function along rays.

    python3 scripts/ornstein_zernike.py --h 0.8 0 --radius 200
"""
import argparse

from polyrenewal.decomposition import killed_green_function, ornstein_zernike_check, walk_geometry
from polyrenewal.lattice import simple_random_walk


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--h", type=float, nargs=2, default=[0.8, 0.0])
    ap.add_argument("--radius", type=int, default=200)
    args = ap.parse_args()
    steps = simple_random_walk(2)
    geom = walk_geometry(steps, args.h)
    pts, G, _ = killed_green_function(steps, geom.lam, args.radius)
    look = {tuple(p): v for p, v in zip(pts, G)}
    print(f"lambda {geom.lam:.6f}")
    for u in ([1.0, 0.0], [1.0, 1.0], [0.0, 1.0], [2.0, 1.0]):
        rep = ornstein_zernike_check(lambda x: look.get(tuple(x), 0.0), geom.tau, u, range(6, 15))
        print(f"direction {u}: fitted power {rep.power:.4f}, expected {rep.expected_power}")


if __name__ == "__main__":
    main()
