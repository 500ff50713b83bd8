"""f_tt of a regularized square/triangle family as the regularization weight epsilon shrinks."""

import argparse

from mixedvol.brascamp_lieb import DeformationFamily, f_tt_quadrature
from mixedvol.convex_core import cube, simplex
from mixedvol.monge_ampere import tensor_grid

if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--t", type=float, default=0.5)
    ap.add_argument("--nodes", type=int, default=321)
    ap.add_argument("--radius", type=float, default=40.0)
    args = ap.parse_args()
    grid = tensor_grid(2, args.radius, args.nodes)
    print("epsilon,f_tt")
    for eps in [0.0, 1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 1e-7]:
        fam = DeformationFamily.from_bodies(cube(2), simplex(2), epsilon=eps)
        print(f"{eps:g},{f_tt_quadrature(fam, args.t, grid).f_tt:.6g}")
