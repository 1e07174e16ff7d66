#!/usr/bin/env python3
"""Arrival-rate curves lambda(eta) of the limiting single-queue process.

Emits one gnuplot-ready curve file per swap rate plus a table of fold
points (eta_peak, lambda_plus). Arrival rates below a curve's maximum
admit two consistent loads; the fold is where they merge.
"""

import argparse

from swapnet.runner import ExperimentSpec, run_experiment


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--betas", type=float, nargs="+",
                    default=[0.2, 0.25, 0.3, 0.35, 0.4, 1.0])
    ap.add_argument("--grid", type=int, default=199)
    ap.add_argument("--out", default="runs/lambda-curve")
    args = ap.parse_args()

    print(f"{'beta':>6} {'eta_peak':>10} {'lambda_plus':>12}")
    for beta in args.betas:
        spec = ExperimentSpec(
            name=f"lambda-curve-beta-{beta:g}",
            subcommand="nlmp-curve",
            parameters={"beta": beta, "grid": args.grid},
            seed=0,
            out_dir=f"{args.out}/beta={beta:g}",
        )
        m = run_experiment(spec)
        print(f"{beta:>6g} {m['eta_peak']:>10.6f} {m['lambda_plus']:>12.6f}")
    print(f"curves in {args.out}/beta=*/curve.dat")


if __name__ == "__main__":
    main()
