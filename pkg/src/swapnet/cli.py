"""Command-line front end for the experiment runner.

Every subcommand resolves to an :class:`~swapnet.runner.ExperimentSpec`
built from three layers, later ones winning: built-in defaults, a JSON
config file (``--config``, a flat object of parameter names), and
explicit flags. The resolved spec is persisted next to the results as
``manifest.json``, so any run can be repeated exactly with
``swapnet <subcommand> --config <out>/manifest.json``-style reuse or by
re-issuing the original command line.

Exit codes: 0 on success, 1 on runtime failure, 2 on usage errors.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from swapnet.runner import ExperimentSpec, run_experiment, sweep

_META_KEYS = {"subcommand", "seed", "out", "config", "name", "sweep_axis", "sweep_values", "window"}

_DEFAULTS = {
    "simulate": {"graph": "cycle", "K": 7, "lam": 0.5, "beta": 1.0, "N": 1,
                 "horizon": 100.0, "record_interval": 1.0, "events": False,
                 "mode": "trajectory", "blocks": 100, "swap_normalization": "per_pair"},
    "transit": {"graph": "cycle", "K": 7, "method": "closed_form", "samples": 100_000},
    "nlmp-curve": {"beta": 1.0, "grid": 99},
    "nlmp-roots": {"beta": 1.0},
    "absorption": {"beta": 1.0, "gamma": 0.5, "n_max": 20, "particles": 0},
    "lifetime": {"graph": "cycle", "K": 7, "lam": 0.542, "beta": 0.2, "N": [1, 2, 4],
                 "runs": 20, "horizon": 60000.0},
    "compare": {"graph": "cycle", "K": 7, "lam": 0.1, "beta": 0.2, "N": 8,
                "window_start": 300.0, "window_end": 2300.0},
}

_REQUIRED = {"nlmp-roots": ("lam",)}


def _add_graph_flags(sp):
    sp.add_argument("--graph", choices=["cycle", "torus", "petersen", "file"])
    sp.add_argument("--K", type=int, help="cycle length / torus rows")
    sp.add_argument("--L", type=int, help="torus columns (defaults to K)")
    sp.add_argument("--graph-file", help="edge list file for --graph file")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="swapnet",
        description="Experiments on queueing networks with position-swapping servers.",
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="master RNG seed (default 0)")
    common.add_argument("--out", default=None, help="output directory (default runs/<name>)")
    common.add_argument("--config", default=None, help="JSON file of parameter values")
    common.add_argument("--name", default=None, help="experiment name (default: subcommand)")
    common.add_argument("--sweep-axis", default=None, help="parameter to sweep over")
    common.add_argument("--sweep-values", default=None,
                        help="comma-separated values for --sweep-axis")

    sub = parser.add_subparsers(dest="subcommand", required=True)

    sp = sub.add_parser("simulate", parents=[common],
                        help="run one network trajectory, or a drift estimate")
    _add_graph_flags(sp)
    sp.add_argument("--lam", type=float, help="exogenous arrival rate per node")
    sp.add_argument("--beta", type=float, help="swap rate per edge")
    sp.add_argument("--N", type=int, help="replicas per vertex")
    sp.add_argument("--horizon", type=float)
    sp.add_argument("--record-interval", type=float)
    sp.add_argument("--events", action=argparse.BooleanOptionalAction,
                    help="also write the event log")
    sp.add_argument("--mode", choices=["trajectory", "drift"])
    sp.add_argument("--blocks", type=int, help="drift mode: number of event blocks")
    sp.add_argument("--swap-normalization", choices=["per_pair", "per_edge"])

    sp = sub.add_parser("transit", parents=[common],
                        help="stationary transit rate of a graph")
    _add_graph_flags(sp)
    sp.add_argument("--method", choices=["brute", "closed_form", "mc"])
    sp.add_argument("--samples", type=int, help="Monte-Carlo sample count")

    sp = sub.add_parser("nlmp-curve", parents=[common],
                        help="arrival-rate curve lambda(eta) of the limiting process")
    sp.add_argument("--beta", type=float)
    sp.add_argument("--grid", type=int, help="number of interior eta points")

    sp = sub.add_parser("nlmp-roots", parents=[common],
                        help="the two loads consistent with a given arrival rate")
    sp.add_argument("--lam", type=float)
    sp.add_argument("--beta", type=float)

    sp = sub.add_parser("absorption", parents=[common],
                        help="mean absorption times of the single-particle walk")
    sp.add_argument("--beta", type=float)
    sp.add_argument("--gamma", type=float)
    sp.add_argument("--n-max", type=int)
    sp.add_argument("--particles", type=int,
                    help="per-start Monte-Carlo particles (0 = closed form only)")

    sp = sub.add_parser("lifetime", parents=[common],
                        help="divergence-onset times across replica counts")
    _add_graph_flags(sp)
    sp.add_argument("--lam", type=float)
    sp.add_argument("--beta", type=float)
    sp.add_argument("--N", type=int, nargs="+", help="replica counts to compare")
    sp.add_argument("--runs", type=int)
    sp.add_argument("--threshold", type=int, help="min-queue divergence level (default: derived)")
    sp.add_argument("--horizon", type=float)
    sp.add_argument("--start-eta", type=float, help="seed queues geometrically at this load")

    sp = sub.add_parser("compare", parents=[common],
                        help="window statistics of a run against the solver equilibrium")
    _add_graph_flags(sp)
    sp.add_argument("--lam", type=float)
    sp.add_argument("--beta", type=float)
    sp.add_argument("--N", type=int)
    sp.add_argument("--eta", type=float, help="target load (default: low root at lam)")
    sp.add_argument("--window", type=float, nargs=2, metavar=("T0", "T1"))

    return parser


def _resolve(args: argparse.Namespace, parser: argparse.ArgumentParser) -> ExperimentSpec:
    sub = args.subcommand
    params = dict(_DEFAULTS[sub])
    seed, name, out = 0, sub, None
    if args.config:
        try:
            loaded = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            parser.error(f"--config: {exc}")
        seed = loaded.pop("seed", seed)
        name = loaded.pop("name", name)
        out = loaded.pop("out_dir", out)
        loaded.pop("subcommand", None)
        loaded.pop("version", None)
        nested = loaded.pop("parameters", None)  # accept a manifest as-is
        params.update(nested if nested is not None else loaded)
    window = getattr(args, "window", None)
    if window is not None:
        params["window_start"], params["window_end"] = window
    params.update({k: v for k, v in vars(args).items()
                   if k not in _META_KEYS and v is not None})
    if args.seed is not None:
        seed = args.seed
    if args.name is not None:
        name = args.name
    if args.out is not None:
        out = args.out
    missing = [k for k in _REQUIRED.get(sub, ()) if params.get(k) is None]
    if missing:
        parser.error(f"{sub}: missing required parameter(s): {', '.join(missing)}")
    return ExperimentSpec(name=name, subcommand=sub,
                          parameters=params, seed=int(seed),
                          out_dir=out if out is not None else f"runs/{name}")


def _parse_values(text: str, parser) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        parser.error(f"--sweep-values: expected comma-separated numbers, got {text!r}")


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    spec = _resolve(args, parser)

    if (args.sweep_axis is None) != (args.sweep_values is None):
        parser.error("--sweep-axis and --sweep-values must be given together")

    try:
        if args.sweep_axis is not None:
            cells = sweep(spec, args.sweep_axis, _parse_values(args.sweep_values, parser))
            failed = [c for c in cells if c.status != "ok"]
            for c in failed:
                print(f"sweep cell {args.sweep_axis}={c.value}: {c.message}", file=sys.stderr)
            print(f"sweep: {len(cells) - len(failed)}/{len(cells)} cells ok, "
                  f"table in {spec.out_dir}/sweep.csv")
            return 1 if failed else 0
        metrics = run_experiment(spec)
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"error: {exc}", file=sys.stderr)
        return 1
    for k in sorted(metrics):
        print(f"{k}: {metrics[k]}")
    print(f"results in {spec.out_dir}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
