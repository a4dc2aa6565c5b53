"""Experiment drivers: seeded policy batches, fleet-size sweeps, SAR*
recordings for transferred replay, and wait-time CDF export.

Episodes for different seeds run in parallel worker threads; outputs are
ordered by seed and formatted with fixed precision, so rerunning a batch
with the same config and seeds produces byte-identical files.
"""

from __future__ import annotations

import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path as FilePath

import numpy as np

from . import engine
from .grid import flatten, unflatten
from .rebalance import (ExternalActionPolicy, PolicyNR, PolicyRR, PolicySARStar,
                        PolicyTSAR)
from .scenario import Scenario, build_scenario

POLICY_NAMES = ("nr", "rr", "sar_star", "t_sar", "external", "replay")


def make_policy(name: str, scenario: Scenario, params: dict | None = None):
    """Instantiate a per-episode policy.

    t_sar takes {"recording": {...}, "scale": float | "auto"}; replay is
    t_sar pinned at scale 1 (verbatim matrices); external takes
    {"actions": [flat matrices]} fed through the trainer action contract.
    """
    params = params or {}
    if name == "nr":
        return PolicyNR()
    if name == "rr":
        return PolicyRR()
    if name == "sar_star":
        return PolicySARStar()
    if name in ("t_sar", "replay"):
        rec = params.get("recording")
        if rec is None:
            raise ValueError(f"policy {name} needs a recording")
        matrices = [unflatten(scenario.grid_spec, m) for m in rec["matrices"]]
        if name == "replay":
            scale = 1.0
        else:
            scale = params.get("scale", "auto")
            if scale == "auto":
                scale = len(scenario.trips) / max(rec["total_trips"], 1)
        return PolicyTSAR(matrices, scale=float(scale))
    if name == "external":
        actions = params.get("actions")
        if actions is None:
            raise ValueError("policy external needs an action sequence")
        return ExternalActionPolicy([np.asarray(unflatten(scenario.grid_spec, a), dtype=float)
                                     for a in actions])
    raise ValueError(f"unknown policy {name!r}; expected one of {POLICY_NAMES}")


@dataclass
class RunResult:
    policy: str
    rows: list[dict]
    per_request: list[dict]
    aggregate: dict
    metrics: list[engine.EpisodeMetrics] = field(default_factory=list)


def _episode(cfg: dict, policy_name: str, seed: int,
             params: dict | None) -> engine.EpisodeMetrics:
    scenario = build_scenario(cfg, seed=seed)
    policy = make_policy(policy_name, scenario, params)
    return engine.run_episode(scenario, policy)


def _pool(n_jobs: int) -> ThreadPoolExecutor:
    return ThreadPoolExecutor(max_workers=min(max(n_jobs, 1), os.cpu_count() or 4))


def run_batch(cfg: dict, policy_name: str, seeds: list[int],
              params: dict | None = None) -> RunResult:
    """Run one policy over a seed batch.

    The aggregate row carries the seed-mean wait and the percent deviation
    from a paired no-rebalance baseline on the same seeds (negative is an
    improvement); for nr itself the deviation is zero by definition.
    """
    if policy_name not in POLICY_NAMES:
        raise ValueError(f"unknown policy {policy_name!r}")
    seeds = list(seeds)
    with _pool(len(seeds)) as pool:
        metrics = list(pool.map(lambda s: _episode(cfg, policy_name, s, params), seeds))
        if policy_name != "nr":
            nr_metrics = list(pool.map(lambda s: _episode(cfg, "nr", s, None), seeds))
        else:
            nr_metrics = metrics

    rows, per_request = [], []
    for seed, m in zip(seeds, metrics):
        rows.append({
            "run_id": f"{cfg['name']}-{policy_name}-s{seed}",
            "seed": seed,
            "policy": policy_name,
            "total_wait_pass_min": m.total_wait_pass_min,
            "mean_wait_min": m.mean_wait_per_request,
            "failed": m.failed_count,
            "served": m.served_count,
        })
        for rid, wait in m.per_request_wait.items():
            per_request.append({"policy": policy_name, "seed": seed,
                                "request_id": rid, "wait_min": wait})

    waits = np.array([m.mean_wait_per_request for m in metrics])
    nr_mean = float(np.mean([m.mean_wait_per_request for m in nr_metrics]))
    mean = float(waits.mean())
    e_nr = 0.0 if policy_name == "nr" else (100.0 * (mean - nr_mean) / nr_mean
                                            if nr_mean > 0 else 0.0)
    aggregate = {
        "policy": policy_name,
        "seeds": len(seeds),
        "mean_wait_min": mean,
        "std_wait_min": float(waits.std(ddof=1)) if len(seeds) > 1 else 0.0,
        "nr_mean_wait_min": nr_mean,
        "e_nr_pct": e_nr,
    }
    return RunResult(policy=policy_name, rows=rows, per_request=per_request,
                     aggregate=aggregate, metrics=metrics)


def sweep_fleet(cfg: dict, sizes: list[int], policies: list[str],
                seeds: list[int]) -> dict:
    """Mean wait per (fleet size, policy), plus per-seed rows."""
    if sorted(sizes) != list(sizes):
        raise ValueError("fleet sizes must be ascending")
    rows, summary = [], []
    for size in sizes:
        size_cfg = dict(cfg, fleet_size=size, vehicle_nodes=None)
        for policy in policies:
            result = run_batch(size_cfg, policy, seeds)
            for row in result.rows:
                rows.append({"fleet_size": size, **row})
            summary.append({
                "fleet_size": size,
                "policy": policy,
                "mean_wait_min": result.aggregate["mean_wait_min"],
                "std_wait_min": result.aggregate["std_wait_min"],
            })
    return {"rows": rows, "summary": summary}


def record_sar(cfg: dict, seeds: list[int]) -> dict[int, dict]:
    """Record the aggregated SAR* rebalance set at every rebalance step,
    one recording per seed, in the replay input format."""
    recordings = {}
    for seed in seeds:
        scenario = build_scenario(cfg, seed=seed)
        metrics = engine.run_episode(scenario, PolicySARStar(), record_rebalance=True)
        recordings[seed] = {
            "scenario": cfg["name"],
            "seed": seed,
            "n_x": scenario.grid_spec.n_x,
            "n_y": scenario.grid_spec.n_y,
            "total_trips": len(scenario.trips),
            "matrices": [flatten(m) for m in metrics.rebalance_matrices],
        }
    return recordings


def export_cdf(per_request_rows: list[dict]) -> list[dict]:
    """Per-policy cumulative distribution of request wait minutes.

    Rows are (policy, wait, cumulative fraction) sorted by wait; the last
    fraction of each policy is exactly 1.
    """
    by_policy: dict[str, list[int]] = {}
    for row in per_request_rows:
        by_policy.setdefault(row["policy"], []).append(row["wait_min"])
    out = []
    for policy in sorted(by_policy):
        waits = np.sort(np.asarray(by_policy[policy]))
        n = len(waits)
        values, counts = np.unique(waits, return_counts=True)
        cum = np.cumsum(counts)
        for v, c in zip(values, cum):
            out.append({"policy": policy, "wait_min": int(v),
                        "cum_frac": float(c / n)})
    return out


# ---------------------------------------------------------------------------
# fixed-name, fixed-format output files

RESULTS_FILE = "results.csv"
SUMMARY_FILE = "summary.csv"
PER_REQUEST_FILE = "per_request_waits.csv"
SWEEP_FILE = "sweep.csv"
SWEEP_SUMMARY_FILE = "sweep_summary.csv"
CDF_FILE = "cdf.csv"


def _fmt(value) -> str:
    if isinstance(value, float):
        return f"{value:.6f}"
    return str(value)


def _write_csv(path, header: list[str], rows: list[dict]) -> None:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_fmt(row[h]) for h in header))
    FilePath(path).write_text("\n".join(lines) + "\n")


def write_run_outputs(outdir, result: RunResult) -> None:
    outdir = FilePath(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    _write_csv(outdir / RESULTS_FILE,
               ["run_id", "seed", "policy", "total_wait_pass_min",
                "mean_wait_min", "failed", "served"], result.rows)
    _write_csv(outdir / SUMMARY_FILE,
               ["policy", "seeds", "mean_wait_min", "std_wait_min",
                "nr_mean_wait_min", "e_nr_pct"], [result.aggregate])
    _write_csv(outdir / PER_REQUEST_FILE,
               ["policy", "seed", "request_id", "wait_min"], result.per_request)


def write_sweep_outputs(outdir, sweep: dict) -> None:
    outdir = FilePath(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    _write_csv(outdir / SWEEP_FILE,
               ["fleet_size", "run_id", "seed", "policy", "total_wait_pass_min",
                "mean_wait_min", "failed", "served"], sweep["rows"])
    _write_csv(outdir / SWEEP_SUMMARY_FILE,
               ["fleet_size", "policy", "mean_wait_min", "std_wait_min"],
               sweep["summary"])


def recording_path(outdir, seed: int) -> FilePath:
    return FilePath(outdir) / f"sar_recording_seed{seed}.json"


def write_recordings(outdir, recordings: dict[int, dict]) -> list[FilePath]:
    outdir = FilePath(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    paths = []
    for seed in sorted(recordings):
        path = recording_path(outdir, seed)
        path.write_text(json.dumps(recordings[seed], separators=(",", ":"),
                                   sort_keys=True) + "\n")
        paths.append(path)
    return paths


def read_per_request(run_dir) -> list[dict]:
    path = FilePath(run_dir) / PER_REQUEST_FILE
    lines = path.read_text().splitlines()
    header = lines[0].split(",")
    rows = []
    for line in lines[1:]:
        values = line.split(",")
        row = dict(zip(header, values))
        row["seed"] = int(row["seed"])
        row["request_id"] = int(row["request_id"])
        row["wait_min"] = int(row["wait_min"])
        rows.append(row)
    return rows


def write_cdf(path, cdf_rows: list[dict]) -> None:
    _write_csv(path, ["policy", "wait_min", "cum_frac"], cdf_rows)
