"""Scenario construction: trip demand, fleet placement, and configuration.

A scenario bundles everything an episode needs: the routing network, the
aggregation grid, clock parameters, a time-sorted trip list, and the initial
fleet. All randomness is derived from a single scenario seed through
independent child streams, so a (config, seed) pair pins the episode inputs
exactly regardless of which policy later runs on them.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from pathlib import Path as FilePath

import numpy as np
import yaml

from .domain import SimClock, Vehicle
from .grid import GridSpec
from .network import (CellNodeIndex, RoutingNetwork, SchemaError,
                      ValidationError, load_network, nearest_node,
                      synth_grid_network)

TIME_BIN_MIN = 15
MINUTES_PER_DAY = 1440


class DegenerateProfile(Exception):
    """All demand rates are zero; nothing can be sampled."""


@dataclass(frozen=True)
class TripRecord:
    trip_id: int
    pickup_t: int
    origin_node: int
    dest_node: int
    n_pass: int = 1

    def __post_init__(self) -> None:
        if not 0 <= self.pickup_t < MINUTES_PER_DAY:
            raise ValueError(f"pickup_t {self.pickup_t} outside a day")
        if self.n_pass < 1:
            raise ValueError("trips carry at least one passenger")


@dataclass(frozen=True)
class Hotspot:
    """One component of the spatial demand mixture.

    weight scales origin draws (modulated per hour by `hourly` when given);
    dest_weight scales destination draws and defaults to weight.
    """

    cell: tuple[int, int]
    weight: float
    hourly: tuple[float, ...] | None = None
    dest_weight: float | None = None

    def origin_weight_at(self, hour: int) -> float:
        if self.hourly is None:
            return self.weight
        return self.weight * self.hourly[hour]

    @property
    def effective_dest_weight(self) -> float:
        return self.weight if self.dest_weight is None else self.dest_weight


def preprocess(raw_trips, net: RoutingNetwork, seed) -> list[TripRecord]:
    """Clean raw trip rows and de-quantize pickup times.

    Three passes: rows missing any pickup/dropoff time or location are
    dropped; rows whose pickup and dropoff location and time are identical
    are dropped; surviving pickup times, quantized to 15-minute bins at the
    source, are replaced by a uniform random minute within their bin.

    Rows are mappings with keys trip_id, pickup_bin_min, origin_node,
    dest_node and optionally dropoff_bin_min and n_pass. Node values are
    external node ids of `net`.
    """
    rng = np.random.default_rng(seed)
    out: list[TripRecord] = []
    for row in raw_trips:
        if isinstance(row, TripRecord):
            raise SchemaError("trips are already preprocessed")
        if not hasattr(row, "get"):
            raise SchemaError(f"raw trip row must be a mapping, got {type(row).__name__}")

        def _blank(key):
            v = row.get(key)
            return v is None or (isinstance(v, str) and not v.strip())

        if _blank("pickup_bin_min") or _blank("origin_node") or _blank("dest_node"):
            continue
        has_dropoff_t = "dropoff_bin_min" in row
        if has_dropoff_t and _blank("dropoff_bin_min"):
            continue

        try:
            trip_id = int(row["trip_id"])
            pickup_bin = int(row["pickup_bin_min"])
            dropoff_bin = int(row["dropoff_bin_min"]) if has_dropoff_t else None
        except (KeyError, TypeError, ValueError) as exc:
            raise SchemaError(f"bad trip row {row}: {exc}") from None
        if not 0 <= pickup_bin < MINUTES_PER_DAY:
            raise SchemaError(f"trip {trip_id}: pickup_bin_min {pickup_bin} outside a day")

        origin_id = str(row["origin_node"]).strip()
        dest_id = str(row["dest_node"]).strip()
        if origin_id not in net.index_of:
            raise ValidationError(f"trip {trip_id}: unknown origin node {origin_id!r}")
        if dest_id not in net.index_of:
            raise ValidationError(f"trip {trip_id}: unknown destination node {dest_id!r}")

        if origin_id == dest_id and dropoff_bin is not None and pickup_bin == dropoff_bin:
            continue

        n_pass = 1
        if not _blank("n_pass"):
            try:
                n_pass = int(row["n_pass"])
            except (TypeError, ValueError):
                raise SchemaError(f"trip {trip_id}: bad n_pass {row['n_pass']!r}") from None

        bin_start = (pickup_bin // TIME_BIN_MIN) * TIME_BIN_MIN
        pickup_t = bin_start + int(rng.integers(0, TIME_BIN_MIN))
        out.append(TripRecord(trip_id=trip_id, pickup_t=pickup_t,
                              origin_node=net.index_of[origin_id],
                              dest_node=net.index_of[dest_id], n_pass=n_pass))
    return out


def load_trip_rows(source) -> list[dict]:
    """Parse a delimited trip file into raw rows for preprocess().

    Header: trip_id,pickup_bin_min,origin_node,dest_node with optional
    dropoff_bin_min and n_pass columns in any position.
    """
    if isinstance(source, (str, FilePath)):
        with open(source, newline="") as fh:
            text = fh.read()
    else:
        text = source.read()
    reader = csv.DictReader(io.StringIO(text))
    required = {"trip_id", "pickup_bin_min", "origin_node", "dest_node"}
    if reader.fieldnames is None or not required.issubset({f.strip() for f in reader.fieldnames}):
        raise SchemaError(f"trip table header must include {sorted(required)}")
    rows = []
    for i, row in enumerate(reader, start=2):
        if None in row:
            raise SchemaError(f"trip table row {i}: too many columns")
        rows.append(row)
    return rows


def sample_subset(trips: list[TripRecord], fraction: float, seed) -> list[TripRecord]:
    """Uniform random subset of round(fraction * N) trips, order preserved."""
    if not 0 < fraction <= 1:
        raise ValueError("fraction must be in (0, 1]")
    n = len(trips)
    k = int(np.floor(fraction * n + 0.5))
    if k >= n:
        return list(trips)
    rng = np.random.default_rng(seed)
    keep = sorted(rng.choice(n, size=k, replace=False))
    return [trips[i] for i in keep]


def synth_demand(profile, hotspots: list[Hotspot], total_trips: int,
                 net: RoutingNetwork, spec: GridSpec, seed) -> list[TripRecord]:
    """Generate synthetic trips from an hourly rate profile and a spatial
    hotspot mixture.

    Activation hours follow the normalized profile with minutes uniform
    within the hour; origins are drawn from the per-hour hotspot weights and
    destinations from the hour-independent dest weights. Positions are
    sampled uniformly inside the chosen cell and snapped to a node of that
    cell. Trip ids are assigned in time order after sorting.
    """
    rates = np.asarray(profile, dtype=float)
    if rates.shape != (24,):
        raise ValueError("profile must have 24 hourly rates")
    if np.any(rates < 0):
        raise ValueError("profile rates must be nonnegative")
    if rates.sum() == 0:
        raise DegenerateProfile("all hourly rates are zero")
    if not hotspots:
        raise ValueError("at least one hotspot required")
    base_w = np.array([h.weight for h in hotspots], dtype=float)
    dest_w = np.array([h.effective_dest_weight for h in hotspots], dtype=float)
    if np.any(base_w < 0) or np.any(dest_w < 0):
        raise ValueError("hotspot weights must be nonnegative")
    if base_w.sum() == 0 or dest_w.sum() == 0:
        raise DegenerateProfile("hotspot mixture has zero total weight")

    cell_index = CellNodeIndex(net, spec)
    rng = np.random.default_rng(seed)
    p_hour = rates / rates.sum()
    p_dest = dest_w / dest_w.sum()

    def draw_node(hotspot: Hotspot) -> int:
        m, n = hotspot.cell
        x_lo, x_hi, y_lo, y_hi = spec.cell_bounds(m, n)
        x = x_lo + rng.random() * (x_hi - x_lo)
        y = y_lo + rng.random() * (y_hi - y_lo)
        return cell_index.snap(m, n, x, y)

    records = []
    for _ in range(total_trips):
        hour = int(rng.choice(24, p=p_hour))
        minute = hour * 60 + int(rng.integers(0, 60))
        w = np.array([h.origin_weight_at(hour) for h in hotspots], dtype=float)
        if w.sum() == 0:
            w = base_w
        origin_hs = hotspots[int(rng.choice(len(hotspots), p=w / w.sum()))]
        dest_hs = hotspots[int(rng.choice(len(hotspots), p=p_dest))]
        records.append((minute, draw_node(origin_hs), draw_node(dest_hs)))

    records.sort(key=lambda r: r[0])
    return [TripRecord(trip_id=i, pickup_t=minute, origin_node=o, dest_node=d)
            for i, (minute, o, d) in enumerate(records)]


def place_fleet(fleet_size: int, net: RoutingNetwork, spec: GridSpec, seed,
                capacity: int = 4) -> list[Vehicle]:
    """Free vehicles at the nodes nearest to uniform random area points."""
    if fleet_size < 1:
        raise ValueError("fleet_size must be >= 1")
    rng = np.random.default_rng(seed)
    vehicles = []
    for vid in range(fleet_size):
        x = spec.x_min + rng.random() * (spec.x_max - spec.x_min)
        y = spec.y_min + rng.random() * (spec.y_max - spec.y_min)
        vehicles.append(Vehicle(id=vid, position_node=nearest_node(net, x, y),
                                capacity=capacity))
    return vehicles


@dataclass
class Scenario:
    """Immutable episode inputs; share freely across episode workers."""

    name: str
    net: RoutingNetwork
    grid_spec: GridSpec
    trips: list[TripRecord]
    vehicles: list[Vehicle]
    fleet_size: int
    seed: int
    policy_seed: object
    dt_sim: int = 1
    dt_dispatch: int = 1
    dt_rebalance: int = 60
    horizon_steps: int = 1440
    max_wait: int = 30
    capacity: int = 4
    dispatch_metric: str = "travel_time"
    obs_include_rebalance: bool = False

    def __post_init__(self) -> None:
        if self.fleet_size < 1:
            raise ValueError("fleet_size must be >= 1")
        self.trips = sorted(self.trips, key=lambda t: (t.pickup_t, t.trip_id))

    def new_clock(self) -> SimClock:
        return SimClock(dt_sim=self.dt_sim, dt_dispatch=self.dt_dispatch,
                        dt_rebalance=self.dt_rebalance, horizon_steps=self.horizon_steps)


_CONFIG_DEFAULTS = {
    "name": None,
    "seed": 0,
    "nodes_file": None,
    "edges_file": None,
    "net_rows": 8,
    "net_cols": 8,
    "net_spacing_miles": 0.5,
    "net_speed_mpm": 0.25,
    "net_noise": 0.0,
    "net_seed": 0,
    "n_x": 5,
    "n_y": 5,
    "x_min": None,
    "x_max": None,
    "y_min": None,
    "y_max": None,
    "trips_file": None,
    "trips_fraction": 1.0,
    "total_trips": 300,
    "hourly_profile": None,
    "hotspots": None,
    "fleet_size": 20,
    "capacity": 4,
    "vehicle_nodes": None,
    "dt_sim": 1,
    "dt_dispatch": 1,
    "dt_rebalance": 60,
    "horizon_steps": 1440,
    "max_wait": 30,
    "dispatch_metric": "travel_time",
    "obs_include_rebalance": False,
}


def load_config(path) -> dict:
    """Read a scenario config (flat YAML key-value file) and apply defaults.

    Relative file paths are resolved against the config file's directory.
    """
    path = FilePath(path)
    with open(path) as fh:
        raw = yaml.safe_load(fh) or {}
    if not isinstance(raw, dict):
        raise SchemaError("scenario config must be a key-value mapping")
    unknown = set(raw) - set(_CONFIG_DEFAULTS)
    if unknown:
        raise SchemaError(f"unknown config keys: {sorted(unknown)}")
    cfg = dict(_CONFIG_DEFAULTS)
    cfg.update(raw)
    if cfg["name"] is None:
        cfg["name"] = path.stem
    for key in ("nodes_file", "edges_file", "trips_file"):
        if cfg[key] is not None:
            cfg[key] = str((path.parent / cfg[key]).resolve())
    return cfg


def build_scenario(cfg: dict, seed: int | None = None) -> Scenario:
    """Materialize a Scenario from a config mapping.

    The effective seed (override or config value) feeds three independent
    child streams: demand, fleet placement, and in-episode policy draws.
    """
    eff_seed = cfg["seed"] if seed is None else seed
    ss = np.random.SeedSequence(int(eff_seed))
    demand_ss, fleet_ss, policy_ss = ss.spawn(3)

    if cfg["nodes_file"]:
        net = load_network(cfg["nodes_file"], cfg["edges_file"])
    else:
        net = synth_grid_network(cfg["net_rows"], cfg["net_cols"],
                                 cfg["net_spacing_miles"], cfg["net_speed_mpm"],
                                 noise=cfg["net_noise"], seed=cfg["net_seed"])

    if cfg["x_min"] is None:
        pad_x = (net.coords[:, 0].max() - net.coords[:, 0].min()) / (2 * cfg["n_x"])
        pad_y = (net.coords[:, 1].max() - net.coords[:, 1].min()) / (2 * cfg["n_y"])
        bounds = (net.coords[:, 0].min() - pad_x, net.coords[:, 0].max() + pad_x,
                  net.coords[:, 1].min() - pad_y, net.coords[:, 1].max() + pad_y)
    else:
        bounds = (cfg["x_min"], cfg["x_max"], cfg["y_min"], cfg["y_max"])
    spec = GridSpec(cfg["n_x"], cfg["n_y"], *bounds)

    if cfg["trips_file"]:
        trips = preprocess(load_trip_rows(cfg["trips_file"]), net, demand_ss)
        if cfg["trips_fraction"] < 1.0:
            trips = sample_subset(trips, cfg["trips_fraction"], demand_ss.spawn(1)[0])
    else:
        if cfg["hourly_profile"] is None or cfg["hotspots"] is None:
            raise SchemaError("config needs either trips_file or hourly_profile + hotspots")
        hotspots = []
        for h in cfg["hotspots"]:
            hotspots.append(Hotspot(
                cell=tuple(h["cell"]),
                weight=float(h["weight"]),
                hourly=tuple(h["hourly"]) if h.get("hourly") else None,
                dest_weight=float(h["dest_weight"]) if h.get("dest_weight") is not None else None,
            ))
        trips = synth_demand(cfg["hourly_profile"], hotspots, cfg["total_trips"],
                             net, spec, demand_ss)

    if cfg["vehicle_nodes"]:
        vehicles = [Vehicle(id=i, position_node=net.index_of[str(nid)],
                            capacity=cfg["capacity"])
                    for i, nid in enumerate(cfg["vehicle_nodes"])]
        fleet_size = len(vehicles)
    else:
        fleet_size = int(cfg["fleet_size"])
        vehicles = place_fleet(fleet_size, net, spec, fleet_ss, capacity=cfg["capacity"])

    return Scenario(
        name=cfg["name"], net=net, grid_spec=spec, trips=trips, vehicles=vehicles,
        fleet_size=fleet_size, seed=int(eff_seed), policy_seed=policy_ss,
        dt_sim=cfg["dt_sim"], dt_dispatch=cfg["dt_dispatch"],
        dt_rebalance=cfg["dt_rebalance"], horizon_steps=cfg["horizon_steps"],
        max_wait=cfg["max_wait"], capacity=cfg["capacity"],
        dispatch_metric=cfg["dispatch_metric"],
        obs_include_rebalance=bool(cfg["obs_include_rebalance"]),
    )


def scenario_from_file(path, seed: int | None = None) -> Scenario:
    return build_scenario(load_config(path), seed=seed)
