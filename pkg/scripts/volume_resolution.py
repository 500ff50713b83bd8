"""Monge-Ampere volume error of every shipped body against the exact volume, per grid size."""

import argparse

from mixedvol.convex_core import body_potential, polytope_volume_exact, shipped_bodies
from mixedvol.monge_ampere import ma_volume_detail, tensor_grid

if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--nodes", type=int, nargs="+", default=[81, 161, 321])
    ap.add_argument("--radius", type=float, default=40.0)
    ap.add_argument("--max-dim", type=int, default=3)
    args = ap.parse_args()
    print("body,dim,nodes,rel_error,shell_estimate")
    for name, body in shipped_bodies().items():
        if body.dim > args.max_dim:
            continue
        exact = polytope_volume_exact(body)
        for nodes in args.nodes:
            if body.dim == 3 and nodes > 161:
                continue
            value, shell = ma_volume_detail(body_potential(body), tensor_grid(body.dim, args.radius, nodes))
            print(f"{name},{body.dim},{nodes},{abs(value / exact - 1):.3e},{shell:.3e}")
