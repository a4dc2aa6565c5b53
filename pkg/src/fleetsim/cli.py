"""Command-line experiment driver.

Subcommands: run, sweep-fleet, record-sar, export-cdf, serve, api. The
compute commands are thin clients: with --server URL they delegate to a
running HTTP service and only write the returned tables; without it they
call the same library functions in process. Either path produces identical
output files. Seeds are always explicit arguments, never derived from the
clock, so batches are exactly reproducible.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path as FilePath

from . import experiments
from .envserver import EnvServer, ScenarioCatalog, serve_stdio
from .scenario import load_config


def parse_seeds(text: str) -> list[int]:
    """Accept '0..9' (inclusive range) or a comma list like '0,3,7'."""
    text = text.strip()
    if ".." in text:
        lo, hi = text.split("..", 1)
        return list(range(int(lo), int(hi) + 1))
    return [int(part) for part in text.split(",") if part]


def parse_int_list(text: str) -> list[int]:
    return [int(part) for part in text.split(",") if part]


def _post(server: str, route: str, payload: dict) -> dict:
    import httpx

    resp = httpx.post(server.rstrip("/") + route, json=payload, timeout=600.0)
    if resp.status_code != 200:
        raise SystemExit(f"server error {resp.status_code}: {resp.text}")
    return resp.json()


def _policy_params(args) -> dict | None:
    params = {}
    if getattr(args, "recording", None):
        params["recording"] = json.loads(FilePath(args.recording).read_text())
    if getattr(args, "scale", None) is not None:
        params["scale"] = args.scale if args.scale == "auto" else float(args.scale)
    if getattr(args, "actions", None):
        params["actions"] = json.loads(FilePath(args.actions).read_text())
    return params or None


def cmd_run(args) -> int:
    cfg = load_config(args.config)
    seeds = parse_seeds(args.seeds)
    params = _policy_params(args)
    if args.server:
        data = _post(args.server, "/runs", {
            "config": cfg, "policy": args.policy, "seeds": seeds,
            "policy_params": params})
        result = experiments.RunResult(policy=args.policy, rows=data["rows"],
                                       per_request=data["per_request"],
                                       aggregate=data["aggregate"])
    else:
        result = experiments.run_batch(cfg, args.policy, seeds, params)
    experiments.write_run_outputs(args.out, result)
    agg = result.aggregate
    print(f"{agg['policy']}: mean wait {agg['mean_wait_min']:.3f} min over "
          f"{agg['seeds']} seeds (E_NR {agg['e_nr_pct']:+.1f}%) -> {args.out}")
    return 0


def cmd_sweep_fleet(args) -> int:
    cfg = load_config(args.config)
    seeds = parse_seeds(args.seeds)
    sizes = parse_int_list(args.sizes)
    policies = [p.strip() for p in args.policies.split(",") if p.strip()]
    if args.server:
        sweep = _post(args.server, "/fleet-sweeps", {
            "config": cfg, "sizes": sizes, "policies": policies, "seeds": seeds})
    else:
        sweep = experiments.sweep_fleet(cfg, sizes, policies, seeds)
    experiments.write_sweep_outputs(args.out, sweep)
    for row in sweep["summary"]:
        print(f"fleet {row['fleet_size']:>4} {row['policy']:>8}: "
              f"{row['mean_wait_min']:.3f} min")
    return 0


def cmd_record_sar(args) -> int:
    cfg = load_config(args.config)
    seeds = parse_seeds(args.seeds)
    if args.server:
        data = _post(args.server, "/sar-recordings", {"config": cfg, "seeds": seeds})
        recordings = {int(s): rec for s, rec in data["recordings"].items()}
    else:
        recordings = experiments.record_sar(cfg, seeds)
    paths = experiments.write_recordings(args.out, recordings)
    print(f"wrote {len(paths)} recording(s) to {args.out}")
    return 0


def cmd_export_cdf(args) -> int:
    rows = experiments.read_per_request(args.run_dir)
    cdf = experiments.export_cdf(rows)
    out = args.out or (FilePath(args.run_dir) / experiments.CDF_FILE)
    experiments.write_cdf(out, cdf)
    print(f"wrote {len(cdf)} CDF points to {out}")
    return 0


def cmd_serve(args) -> int:
    catalog = ScenarioCatalog.from_dir(args.scenarios)
    if args.stdio:
        serve_stdio(catalog)
        return 0
    host, port = args.listen.rsplit(":", 1)
    server = EnvServer((host, int(port)), catalog)
    print(f"env server listening on {server.server_address[0]}:"
          f"{server.server_address[1]} ({len(catalog.names())} scenario(s))")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        server.shutdown()
    return 0


def cmd_api(args) -> int:
    import uvicorn

    from .service.app import create_app

    catalog = ScenarioCatalog.from_dir(args.scenarios)
    host, port = args.listen.rsplit(":", 1)
    uvicorn.run(create_app(catalog), host=host, port=int(port), log_level="warning")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fleetsim")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a seeded episode batch for one policy")
    run.add_argument("--config", required=True)
    run.add_argument("--policy", required=True, choices=experiments.POLICY_NAMES)
    run.add_argument("--seeds", required=True, help="e.g. 0..9 or 0,1,2")
    run.add_argument("--out", required=True)
    run.add_argument("--server", help="delegate to an HTTP service URL")
    run.add_argument("--recording", help="SAR* recording JSON for t_sar/replay")
    run.add_argument("--scale", help="t_sar rescale factor or 'auto'")
    run.add_argument("--actions", help="action matrix JSON for policy external")
    run.set_defaults(func=cmd_run)

    sweep = sub.add_parser("sweep-fleet", help="mean wait across fleet sizes")
    sweep.add_argument("--config", required=True)
    sweep.add_argument("--sizes", required=True, help="ascending, e.g. 10,15,20,30")
    sweep.add_argument("--policies", default="nr,sar_star")
    sweep.add_argument("--seeds", required=True)
    sweep.add_argument("--out", required=True)
    sweep.add_argument("--server")
    sweep.set_defaults(func=cmd_sweep_fleet)

    rec = sub.add_parser("record-sar", help="record SAR* rebalance sets for replay")
    rec.add_argument("--config", required=True)
    rec.add_argument("--seeds", required=True)
    rec.add_argument("--out", required=True)
    rec.add_argument("--server")
    rec.set_defaults(func=cmd_record_sar)

    cdf = sub.add_parser("export-cdf", help="per-request wait CDF from a run dir")
    cdf.add_argument("--run-dir", required=True)
    cdf.add_argument("--out")
    cdf.set_defaults(func=cmd_export_cdf)

    serve = sub.add_parser("serve", help="line-protocol environment server")
    serve.add_argument("--scenarios", required=True, help="directory of scenario YAMLs")
    mode = serve.add_mutually_exclusive_group(required=True)
    mode.add_argument("--listen", help="HOST:PORT")
    mode.add_argument("--stdio", action="store_true")
    serve.set_defaults(func=cmd_serve)

    api = sub.add_parser("api", help="HTTP service wrapping the simulator")
    api.add_argument("--scenarios", required=True)
    api.add_argument("--listen", default="127.0.0.1:8000")
    api.set_defaults(func=cmd_api)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
