#!/usr/bin/env python3
"""Width-ladder convergence study for the blob particle solver.

Runs the solver for a list of kernel widths against the self-similar
reference profile and writes the tidy report produced by the convergence
harness (one row per eps/metric).  Plot externally from report.csv.
"""
import argparse
import json

from blobflow.config import ExperimentConfig
from blobflow.runner import converge


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--m", type=float, default=2.0, help="diffusion exponent (power law)")
    ap.add_argument("--family", default="gaussian", choices=["gaussian", "bump"])
    ap.add_argument("--eps", type=float, nargs="+", default=[0.4, 0.2, 0.1])
    ap.add_argument("--n-particles", type=int, default=400)
    ap.add_argument("--horizon", type=float, default=0.25)
    ap.add_argument("--t0", type=float, default=1.0, help="profile age at the initial time")
    ap.add_argument("--out", default="runs/eps_convergence")
    ap.add_argument("--threads", type=int, default=1)
    args = ap.parse_args()

    cfg = ExperimentConfig.from_dict(
        {
            "kernel": {"family": args.family, "eps": args.eps[0], "d": 1},
            "energy": {"kind": "power", "m": args.m},
            "solver": "particle",
            "n_particles": args.n_particles,
            "T": args.horizon,
            "record_every": 1,
            "initial": {
                "kind": "quantile",
                "density": {"kind": "barenblatt", "m": args.m, "t0": args.t0},
            },
            "output_dir": args.out,
            "sweep": {"eps": args.eps},
        }
    )
    result = converge(cfg, threads=args.threads)
    print(json.dumps(result["summary"], indent=2))
    print(f"report: {result['report']}")
    w2 = {r[0]: r[4] for r in result["rows"] if r[3] == "w2_final_vs_reference"}
    for eps in sorted(w2, reverse=True):
        print(f"  eps={eps:<5} W2(final, reference) = {w2[eps]:.6f}")


if __name__ == "__main__":
    main()
