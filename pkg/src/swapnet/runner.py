"""Experiment orchestration: specs, manifests, atomic persistence, sweeps.

Every experiment is described by an :class:`ExperimentSpec` (subcommand
plus a flat parameter dict) and produces, inside its output directory, a
``manifest.json`` that fully reproduces the run, machine-readable result
files, a flat ``summary.json`` of scalar metrics, and a human-readable
``summary.txt``. Re-running the same spec rewrites byte-identical files.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

from swapnet import __version__
from swapnet.absorption import absorption_mc, absorption_times
from swapnet.estimators import estimate_drift
from swapnet.metastability import (
    default_divergence_threshold,
    equilibrium_comparison,
    lifetime_trend,
    metastable_lifetime,
)
from swapnet.nlmp import find_eta_roots, lambda_of_eta, lambda_peak, rates_from_eta
from swapnet.seeds import derive_seed
from swapnet.simulate import SimConfig, simulate
from swapnet.topology import build_cycle, build_torus, load_edge_list, petersen
from swapnet.transit import brute_force_p, closed_form_p, monte_carlo_p

SUBCOMMANDS = (
    "simulate",
    "transit",
    "nlmp-curve",
    "nlmp-roots",
    "absorption",
    "lifetime",
    "compare",
)


@dataclass(frozen=True)
class ExperimentSpec:
    """One reproducible experiment: what to run, with what, and where."""

    name: str
    subcommand: str
    parameters: dict
    seed: int
    out_dir: str

    def __post_init__(self):
        if self.subcommand not in SUBCOMMANDS:
            raise ValueError(
                f"unknown subcommand {self.subcommand!r}; expected one of {', '.join(SUBCOMMANDS)}"
            )
        if not self.name:
            raise ValueError("experiment name must be nonempty")


@dataclass(frozen=True)
class CellResult:
    """Outcome of one sweep cell; failures keep the error message."""

    value: float
    status: str  # "ok" | "error"
    out_dir: str
    metrics: dict = field(default_factory=dict)
    message: str = ""


# ---------------------------------------------------------------------------
# persistence helpers
# ---------------------------------------------------------------------------

def atomic_write_text(path: Path, text: str) -> None:
    """Write via a temp file and rename so readers never see partial data."""
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text)
    os.replace(tmp, path)


def write_csv(path: Path, header: list[str], rows) -> None:
    buf = io.StringIO()
    w = csv.writer(buf)  # excel dialect: CRLF line endings, minimal quoting
    w.writerow(header)
    w.writerows(rows)
    atomic_write_text(path, buf.getvalue())


def write_json(path: Path, obj) -> None:
    atomic_write_text(path, json.dumps(obj, indent=2, sort_keys=True) + "\n")


def write_manifest(spec: ExperimentSpec, out: Path) -> None:
    write_json(out / "manifest.json", {
        "name": spec.name,
        "subcommand": spec.subcommand,
        "parameters": spec.parameters,
        "seed": spec.seed,
        "out_dir": spec.out_dir,
        "version": __version__,
    })


def load_manifest(path) -> ExperimentSpec:
    """Rebuild the spec a manifest was written from (round-trip inverse)."""
    raw = json.loads(Path(path).read_text())
    return ExperimentSpec(
        name=raw["name"],
        subcommand=raw["subcommand"],
        parameters=raw["parameters"],
        seed=raw["seed"],
        out_dir=raw["out_dir"],
    )


def _fmt(x) -> str:
    if isinstance(x, float):
        return f"{x:.6g}"
    return str(x)


# ---------------------------------------------------------------------------
# graph construction shared by the simulation-backed subcommands
# ---------------------------------------------------------------------------

def _build_graph(p: dict):
    kind = p.get("graph", "cycle")
    if kind == "cycle":
        return build_cycle(int(p["K"]))
    if kind == "torus":
        return build_torus(int(p["K"]), int(p.get("L", p["K"])))
    if kind == "petersen":
        return petersen()
    if kind == "file":
        return load_edge_list(p["graph_file"])
    raise ValueError(f"graph: unknown kind {kind!r}; expected cycle, torus, petersen, or file")


def _lambda_offsets(p: dict) -> dict:
    """Arrival table from the flat parameters: offset-0 rate plus extras."""
    table = {0: float(p.get("lam", 0.0))}
    for k, v in (p.get("offsets") or {}).items():
        table[int(k)] = float(v)
    return table


def _sim_config(p: dict, seed: int, **overrides) -> SimConfig:
    kwargs = dict(
        topology=_build_graph(p),
        lambda_offsets=_lambda_offsets(p),
        beta=float(p["beta"]),
        replica_count=int(p.get("N", 1)),
        seed=seed,
        swap_normalization=p.get("swap_normalization", "per_pair"),
    )
    kwargs.update(overrides)
    return SimConfig(**kwargs)


# ---------------------------------------------------------------------------
# subcommand handlers: run, write result files, return scalar metrics
# ---------------------------------------------------------------------------

def _run_simulate(spec: ExperimentSpec, out: Path) -> dict:
    p = spec.parameters
    mode = p.get("mode", "trajectory")
    if mode == "drift":
        # max_events is a placeholder; the estimator sets its own budget
        est = estimate_drift(
            _sim_config(p, spec.seed, max_events=1),
            block_count=int(p.get("blocks", 100)),
        )
        return {
            "drift": est.rate,
            "ci_half_width": est.half_width,
            "spacing": est.spacing,
            "blocks_used": est.blocks_used,
            "blocks_total": est.blocks_total,
        }
    if mode != "trajectory":
        raise ValueError(f"mode: expected trajectory or drift, got {mode!r}")

    cfg = _sim_config(
        p, spec.seed,
        horizon=float(p["horizon"]),
        record_interval=float(p.get("record_interval", 1.0)),
        record_event_log=bool(p.get("events", False)),
    )
    traj = simulate(cfg)
    rows = []
    for t, qs in zip(traj.sample_times, traj.queue_lengths):
        rows.extend((_fmt(float(t)), s, int(q)) for s, q in enumerate(qs))
    write_csv(out / "trajectory.csv", ["time", "server_id", "queue_len"], rows)
    if cfg.record_event_log:
        write_csv(out / "events.csv", ["time", "kind", "node", "server", "dest"],
                  [(_fmt(t), kind, a, b, c) for t, kind, a, b, c in traj.event_log])
    final = traj.final_state.queues
    return {
        "events": sum(traj.event_counts.values()),
        "final_time": float(traj.sample_times[-1]),
        "mean_queue_final": sum(len(q) for q in final) / len(final),
        "max_queue_final": max(len(q) for q in final),
    }


def _run_transit(spec: ExperimentSpec, out: Path) -> dict:
    p = spec.parameters
    G = _build_graph(p)
    method = p.get("method", "closed_form")
    result = {"graph": p.get("graph", "cycle"), "vertices": G.vertex_count, "method": method}
    if method == "brute":
        val = brute_force_p(G)
        result |= {"p": float(val), "fraction": f"{val.numerator}/{val.denominator}"}
    elif method == "closed_form":
        val = closed_form_p(G)
        result |= {"p": float(val), "fraction": f"{val.numerator}/{val.denominator}"}
    elif method == "mc":
        est = monte_carlo_p(G, samples=int(p.get("samples", 10**5)), seed=spec.seed)
        result |= {"p": est.value, "samples": est.samples, "ci_half_width": est.ci_half_width}
    else:
        raise ValueError(f"method: expected brute, closed_form, or mc, got {method!r}")
    write_json(out / "transit.json", result)
    return {"p": result["p"]}


def _run_nlmp_curve(spec: ExperimentSpec, out: Path) -> dict:
    p = spec.parameters
    beta = float(p["beta"])
    grid = int(p.get("grid", 99))
    if grid < 1:
        raise ValueError(f"grid: need at least 1 point, got {grid}")
    etas = [i / (grid + 1) for i in range(1, grid + 1)]
    curve = lambda_of_eta(etas, beta)
    write_csv(out / "curve.csv", ["eta", "lambda"],
              [(_fmt(e), _fmt(lam)) for e, lam in curve])
    atomic_write_text(out / "curve.dat",
                      "".join(f"{e:.9f} {lam:.9f}\n" for e, lam in curve))
    eta_peak, lam_plus = lambda_peak(beta)
    return {"beta": beta, "points": grid, "eta_peak": eta_peak, "lambda_plus": lam_plus}


def _run_nlmp_roots(spec: ExperimentSpec, out: Path) -> dict:
    p = spec.parameters
    lam, beta = float(p["lam"]), float(p["beta"])
    roots = find_eta_roots(lam, beta)
    eta_peak, lam_plus = lambda_peak(beta)
    if roots is None:
        raise RuntimeError(
            f"no equilibria: lambda={lam} exceeds the curve maximum {lam_plus:.6f} at beta={beta}"
        )
    em, ep = roots
    # full law only at the low root: it stays below the curve peak, so
    # its truncation is bounded; the high root approaches load 1 as lam
    # shrinks and its state space grows without bound
    prof = rates_from_eta(em, beta)
    write_json(out / "roots.json", {
        "lam": lam, "beta": beta,
        "eta_minus": em, "eta_plus": ep,
        "eta_peak": eta_peak, "lambda_plus": lam_plus,
        "minus": {"eta": em, "beta": beta, "lambda": prof.lam, "M": prof.M,
                  "nu": {str(k): v for k, v in sorted(prof.nu.items())},
                  "q": [float(x) for x in prof.q]},
    })
    return {"eta_minus": em, "eta_plus": ep, "lambda_plus": lam_plus}


def _run_absorption(spec: ExperimentSpec, out: Path) -> dict:
    p = spec.parameters
    beta, gamma = float(p["beta"]), float(p["gamma"])
    n_max = int(p.get("n_max", 20))
    model = absorption_times(beta, gamma, n_max=n_max)
    particles = int(p.get("particles", 0))
    header = ["n", "expected_time"]
    cols = [list(range(n_max + 1)), [_fmt(float(t)) for t in model.T]]
    metrics = {"expected_visits": model.expected_visits, "T0": float(model.T[0])}
    if particles:
        header += ["mc_mean", "mc_se"]
        means, ses = [], []
        for n in range(n_max + 1):
            s = absorption_mc(beta, gamma, start=n, particles=particles,
                              seed=derive_seed(spec.seed, "absorption", n))
            means.append(_fmt(s.mean_time))
            ses.append(_fmt(s.se_time))
        cols += [means, ses]
        metrics["particles"] = particles
    write_csv(out / "absorption.csv", header, list(zip(*cols)))
    return metrics


def _run_lifetime(spec: ExperimentSpec, out: Path) -> dict:
    p = spec.parameters
    replicas = p["N"]
    if isinstance(replicas, (int, float)):
        replicas = [replicas]
    replicas = [int(n) for n in replicas]
    lam = sum(_lambda_offsets(p).values())
    threshold = p.get("threshold")
    if threshold is None:
        roots = find_eta_roots(lam, float(p["beta"]))
        if roots is None:
            raise RuntimeError(f"no equilibrium at lam={lam}: pass an explicit threshold")
        threshold = default_divergence_threshold(roots[0])
    estimates = []
    rows = []
    for n in replicas:
        cfg = _sim_config({**p, "N": n}, spec.seed, horizon=float(p["horizon"]))
        est = metastable_lifetime(cfg, int(threshold), int(p.get("runs", 20)),
                                  start_eta=p.get("start_eta"))
        estimates.append(est)
        rows.extend((n, run, _fmt(t), int(c))
                    for run, (t, c) in enumerate(zip(est.hitting_times, est.censored)))
    write_csv(out / "lifetime.csv", ["N", "run", "hitting_time", "censored"], rows)
    metrics = {"threshold": int(threshold)}
    for est in estimates:
        metrics[f"median_N{est.N}"] = est.summary.median
        metrics[f"observed_N{est.N}"] = est.observed
    if len(estimates) > 1:
        trend = lifetime_trend(estimates)
        write_json(out / "trend.json", {
            "medians": list(trend.medians),
            "pairs": [{"N_low": a, "N_high": b, "p_value": pv} for a, b, pv in trend.pairs],
            "increasing": trend.increasing,
            "significant_5pct": trend.significant(0.05),
        })
        metrics["increasing"] = trend.increasing
    return metrics


def _run_compare(spec: ExperimentSpec, out: Path) -> dict:
    p = spec.parameters
    lam = sum(_lambda_offsets(p).values())
    beta = float(p["beta"])
    eta = p.get("eta")
    if eta is None:
        roots = find_eta_roots(lam, beta)
        if roots is None:
            raise RuntimeError(f"no equilibrium at lam={lam}, beta={beta}: pass eta explicitly")
        eta = roots[0]
    profile = rates_from_eta(float(eta), beta)
    window = (float(p["window_start"]), float(p["window_end"]))
    cfg = _sim_config(p, spec.seed, horizon=window[1])
    rep = equilibrium_comparison(cfg, profile, window)
    write_json(out / "compare.json", {
        "eta": rep.eta,
        "window": list(rep.window),
        "mean_queue": rep.mean_queue,
        "target_mean": rep.target_mean,
        "mean_ratio": rep.mean_ratio,
        "geometric_p": rep.geometric_p,
        "max_discrepancy": rep.max_discrepancy,
        "nu_table": {str(k): {"rate": v[0], "target": v[1]} for k, v in rep.nu_table.items()},
        "nu_max_discrepancy": rep.nu_max_discrepancy,
        "divergence_flag": rep.divergence_flag,
        "onset_time": rep.onset_time,
    })
    return {
        "mean_ratio": rep.mean_ratio,
        "geometric_p": rep.geometric_p,
        "diverged": rep.divergence_flag,
        "onset_time": math.nan if rep.onset_time is None else rep.onset_time,
    }


_HANDLERS = {
    "simulate": _run_simulate,
    "transit": _run_transit,
    "nlmp-curve": _run_nlmp_curve,
    "nlmp-roots": _run_nlmp_roots,
    "absorption": _run_absorption,
    "lifetime": _run_lifetime,
    "compare": _run_compare,
}


def _summary_text(spec: ExperimentSpec, metrics: dict) -> str:
    lines = [f"experiment: {spec.name}",
             f"subcommand: {spec.subcommand}",
             f"seed: {spec.seed}"]
    lines += [f"{k}: {_fmt(v)}" for k, v in sorted(metrics.items())]
    return "\n".join(lines) + "\n"


def run_experiment(spec: ExperimentSpec) -> dict:
    """Execute one spec; returns its scalar metrics.

    All outputs land in ``spec.out_dir``. On failure every file written
    during this run is removed before the exception propagates, so a
    result directory is either complete or absent.
    """
    out = Path(spec.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    before = set(out.iterdir())
    try:
        metrics = _HANDLERS[spec.subcommand](spec, out)
        write_json(out / "summary.json", _jsonable(metrics))
        atomic_write_text(out / "summary.txt", _summary_text(spec, metrics))
        write_manifest(spec, out)
    except BaseException:
        for leftover in set(out.iterdir()) - before:
            if leftover.is_file():
                leftover.unlink()
        raise
    return metrics


def _jsonable(metrics: dict) -> dict:
    out = {}
    for k, v in metrics.items():
        if isinstance(v, float) and math.isnan(v):
            out[k] = None
        elif isinstance(v, Fraction):
            out[k] = float(v)
        else:
            out[k] = v
    return out


def sweep(template: ExperimentSpec, axis: str, values) -> list[CellResult]:
    """Run one cell per axis value with derived sub-seeds; merge the metrics.

    Cells are independent: cell i always runs with seed derived from
    (template seed, axis, i), so results do not depend on execution
    order and a sweep can be re-cut with more values without disturbing
    existing cells. Failed cells are recorded and skipped in the merge;
    the merged table lands in ``<out_dir>/sweep.csv`` keyed by the axis.
    """
    values = list(values)
    if not values:
        raise ValueError("sweep needs at least one axis value")
    root = Path(template.out_dir)
    cells = []
    for i, value in enumerate(values):
        cell_dir = root / f"{axis}={_fmt(value)}"
        cell = ExperimentSpec(
            name=f"{template.name}-{axis}-{_fmt(value)}",
            subcommand=template.subcommand,
            parameters={**template.parameters, axis: value},
            seed=derive_seed(template.seed, "sweep", axis, i),
            out_dir=str(cell_dir),
        )
        try:
            metrics = run_experiment(cell)
            cells.append(CellResult(value=value, status="ok", out_dir=str(cell_dir),
                                    metrics=metrics))
        except Exception as exc:  # noqa: BLE001 - cell isolation is the point
            cells.append(CellResult(value=value, status="error", out_dir=str(cell_dir),
                                    message=str(exc)))
    keys = sorted({k for c in cells for k in c.metrics})
    rows = [[_fmt(c.value), c.status] + [_fmt(c.metrics[k]) if k in c.metrics else ""
                                         for k in keys]
            for c in cells]
    write_csv(root / "sweep.csv", [axis, "status"] + keys, rows)
    return cells
