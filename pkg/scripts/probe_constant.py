"""Empirical uniform comparison constant C1 for factors between C^{-1} omega and C omega.

Prints the vertex-scan value and, per seed, the maximum over random trials
alone, to show how slowly uniform sampling approaches the vertex value.
"""

import argparse
import json

from mixedvol.t_hodge import probe_holdout, uniform_comparison_probe

if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=3)
    ap.add_argument("--m", type=int, default=2)
    ap.add_argument("--C", type=float, default=4.0)
    ap.add_argument("--trials", type=int, default=2000)
    ap.add_argument("--seeds", type=int, nargs="+", default=[0, 1])
    ap.add_argument("--holdout", type=int, default=10_000)
    args = ap.parse_args()
    vertex = uniform_comparison_probe(args.n, args.m, args.C, trials=0).vertex_max
    out = {"vertex_max": vertex, "trials_only": {}}
    for seed in args.seeds:
        p = uniform_comparison_probe(args.n, args.m, args.C, args.trials, seed=seed, vertices=False)
        out["trials_only"][seed] = p.C1
    C1 = max(vertex, *out["trials_only"].values())
    out["C1"] = C1
    out["holdout"] = probe_holdout(args.n, args.m, args.C, C1, args.holdout, seed=max(args.seeds) + 1).to_dict()
    print(json.dumps(out, indent=2))
