"""Directed routing graph with travel-time weights and shortest paths.

Nodes are referenced internally by dense integer handles assigned in
ascending order of their external string ids, so every id comparison rule
("lowest node id wins") reduces to comparing handles. Edge weights are
strictly positive travel minutes; links are directional, and the weight of
A->B may differ from B->A.

Single-source Dijkstra results are cached per origin because dispatch
queries cluster by vehicle position. The cache is filled with deterministic
values, so concurrent readers racing on the same origin always observe
identical results.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from heapq import heappush, heappop
from pathlib import Path as FilePath

import numpy as np


class SchemaError(Exception):
    """Malformed row in a node or edge table."""


class ValidationError(Exception):
    """Structurally valid input that violates a network invariant."""


class Unreachable(Exception):
    """No directed path exists between the requested endpoints."""


@dataclass
class Path:
    """A directed walk through the network, minimal in total travel time."""

    node_sequence: list[int]
    leg_times: list[float]

    @property
    def total_time(self) -> float:
        return sum(self.leg_times)

    @property
    def is_empty(self) -> bool:
        return not self.leg_times


EMPTY_PATH_TIME = 0.0


class RoutingNetwork:
    """Immutable directed graph over planar nodes.

    node_ids[h] is the external id of handle h; handles are assigned in
    ascending id order. coords is an (n, 2) array of x, y in miles.
    """

    def __init__(self, nodes: list[tuple[str, float, float]],
                 edges: list[tuple[str, str, float]]):
        seen = set()
        for node_id, _, _ in nodes:
            if node_id in seen:
                raise ValidationError(f"duplicate node id {node_id!r}")
            seen.add(node_id)
        ordered = sorted(nodes, key=lambda n: n[0])
        self.node_ids: list[str] = [n[0] for n in ordered]
        self.index_of: dict[str, int] = {nid: h for h, nid in enumerate(self.node_ids)}
        self.coords = np.array([[n[1], n[2]] for n in ordered], dtype=float)

        self.out_edges: list[list[tuple[int, float]]] = [[] for _ in self.node_ids]
        self.edge_count = 0
        for frm, to, w in edges:
            if frm not in self.index_of or to not in self.index_of:
                missing = frm if frm not in self.index_of else to
                raise ValidationError(f"edge references unknown node {missing!r}")
            if not (w > 0) or not math.isfinite(w):
                raise ValidationError(f"edge ({frm!r}, {to!r}) weight {w} not strictly positive")
            self.out_edges[self.index_of[frm]].append((self.index_of[to], float(w)))
            self.edge_count += 1
        for adj in self.out_edges:
            adj.sort()

        self._sssp_cache: dict[int, tuple[np.ndarray, np.ndarray]] = {}

    @property
    def n_nodes(self) -> int:
        return len(self.node_ids)

    def edge_time(self, u: int, v: int) -> float:
        for to, w in self.out_edges[u]:
            if to == v:
                return w
        raise ValidationError(f"no edge {self.node_ids[u]!r} -> {self.node_ids[v]!r}")

    def _single_source(self, origin: int) -> tuple[np.ndarray, np.ndarray]:
        """Dijkstra from origin. Ties prefer the lower-handle predecessor so
        reconstructed paths are canonical across platforms."""
        cached = self._sssp_cache.get(origin)
        if cached is not None:
            return cached
        n = self.n_nodes
        dist = np.full(n, np.inf)
        pred = np.full(n, -1, dtype=int)
        dist[origin] = 0.0
        done = np.zeros(n, dtype=bool)
        heap: list[tuple[float, int]] = [(0.0, origin)]
        while heap:
            d, u = heappop(heap)
            if done[u]:
                continue
            done[u] = True
            for v, w in self.out_edges[u]:
                nd = d + w
                if nd < dist[v] or (nd == dist[v] and pred[v] > u):
                    dist[v] = nd
                    pred[v] = u
                    heappush(heap, (nd, v))
        result = (dist, pred)
        self._sssp_cache[origin] = result
        return result

    def travel_time(self, origin: int, dest: int) -> float:
        """Shortest travel time in minutes; inf when dest is unreachable."""
        if origin == dest:
            return EMPTY_PATH_TIME
        dist, _ = self._single_source(origin)
        return float(dist[dest])


def shortest_path(net: RoutingNetwork, origin: int, dest: int) -> Path:
    """Minimum-travel-time path from origin to dest.

    origin == dest yields the empty path with total_time 0. Raises
    Unreachable when no directed path exists.
    """
    if origin == dest:
        return Path([origin], [])
    dist, pred = net._single_source(origin)
    if not np.isfinite(dist[dest]):
        raise Unreachable(
            f"no path {net.node_ids[origin]!r} -> {net.node_ids[dest]!r}")
    seq = [dest]
    while seq[-1] != origin:
        seq.append(int(pred[seq[-1]]))
    seq.reverse()
    legs = [net.edge_time(seq[i], seq[i + 1]) for i in range(len(seq) - 1)]
    return Path(seq, legs)


def nearest_node(net: RoutingNetwork, x: float, y: float) -> int:
    """Handle of the node nearest to (x, y); ties go to the lowest node id."""
    if net.n_nodes == 0:
        raise ValidationError("empty network")
    d2 = (net.coords[:, 0] - x) ** 2 + (net.coords[:, 1] - y) ** 2
    return int(np.argmin(d2))


class CellNodeIndex:
    """Nearest-node lookup constrained to a grid cell.

    Snapping a disaggregated position to the nearest node anywhere can cross
    a cell boundary and silently move a count between cells; preferring
    nodes inside the source cell keeps re-aggregation exact. Cells with no
    node fall back to the global nearest node.
    """

    def __init__(self, net: RoutingNetwork, spec):
        from . import grid as _grid

        self.net = net
        self.spec = spec
        self.nodes_in_cell: dict[tuple[int, int], list[int]] = {}
        for h in range(net.n_nodes):
            x, y = net.coords[h]
            try:
                cell = _grid.cell_of(spec, float(x), float(y))
            except _grid.OutOfBounds:
                continue
            self.nodes_in_cell.setdefault(cell, []).append(h)

    def snap(self, m: int, n: int, x: float, y: float) -> int:
        candidates = self.nodes_in_cell.get((m, n))
        if not candidates:
            return nearest_node(self.net, x, y)
        pts = self.net.coords[candidates]
        d2 = (pts[:, 0] - x) ** 2 + (pts[:, 1] - y) ** 2
        return candidates[int(np.argmin(d2))]


def _read_table(source, expected: list[str], kind: str) -> list[dict]:
    if isinstance(source, (str, FilePath)):
        with open(source, newline="") as fh:
            text = fh.read()
    else:
        text = source.read()
    reader = csv.DictReader(io.StringIO(text))
    if reader.fieldnames is None or [f.strip() for f in reader.fieldnames] != expected:
        raise SchemaError(f"{kind} table header must be {','.join(expected)}")
    rows = []
    for i, row in enumerate(reader, start=2):
        if any(v is None for v in row.values()) or None in row:
            raise SchemaError(f"{kind} table row {i}: wrong column count")
        rows.append(row)
    return rows


def load_network(node_table, edge_table) -> RoutingNetwork:
    """Build a validated network from delimited node and edge tables.

    Node table header: node_id,x,y (miles). Edge table header:
    from,to,travel_time_min with one directional edge per row.
    """
    nodes = []
    for row in _read_table(node_table, ["node_id", "x", "y"], "node"):
        try:
            nodes.append((row["node_id"].strip(), float(row["x"]), float(row["y"])))
        except ValueError as exc:
            raise SchemaError(f"bad node row {row}: {exc}") from None
    edges = []
    for row in _read_table(edge_table, ["from", "to", "travel_time_min"], "edge"):
        try:
            edges.append((row["from"].strip(), row["to"].strip(),
                          float(row["travel_time_min"])))
        except ValueError as exc:
            raise SchemaError(f"bad edge row {row}: {exc}") from None
    return RoutingNetwork(nodes, edges)


def synth_grid_network(rows: int, cols: int, spacing: float, speed: float,
                       noise: float = 0.0, seed: int = 0) -> RoutingNetwork:
    """Regular rows x cols lattice with bidirectional 4-neighbor links.

    Each direction weighs spacing/speed minutes; with noise > 0 every
    directed edge is scaled by an independent factor drawn uniformly from
    [1 - noise, 1 + noise], which exercises asymmetric travel times.
    """
    if rows < 1 or cols < 1:
        raise ValidationError("rows and cols must be >= 1")
    if spacing <= 0 or speed <= 0:
        raise ValidationError("spacing and speed must be positive")
    width = len(str(rows * cols - 1))
    node_name = lambda r, c: f"n{r * cols + c:0{width}d}"
    nodes = [(node_name(r, c), c * spacing, r * spacing)
             for r in range(rows) for c in range(cols)]
    base = spacing / speed
    rng = np.random.default_rng(seed)
    edges = []
    for r in range(rows):
        for c in range(cols):
            for dr, dc in ((0, 1), (1, 0), (0, -1), (-1, 0)):
                nr, nc = r + dr, c + dc
                if 0 <= nr < rows and 0 <= nc < cols:
                    w = base
                    if noise > 0:
                        w = base * float(rng.uniform(1.0 - noise, 1.0 + noise))
                    edges.append((node_name(r, c), node_name(nr, nc), w))
    return RoutingNetwork(nodes, edges)
