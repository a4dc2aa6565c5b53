"""Independent oracles shared across test modules.

These deliberately reimplement behavior with brute force so product code
changes cannot silently drift past them.
"""

from __future__ import annotations

import math


def enumerate_shortest(net, origin: int, dest: int) -> float | None:
    """Minimum travel time over all simple paths, by exhaustive DFS.

    Returns None when dest is unreachable. Only viable for tiny graphs.
    """
    if origin == dest:
        return 0.0
    best: list[float | None] = [None]

    def dfs(node: int, visited: set[int], cost: float) -> None:
        for nxt, w in net.out_edges[node]:
            if nxt in visited:
                continue
            total = cost + w
            if nxt == dest:
                if best[0] is None or total < best[0]:
                    best[0] = total
            else:
                visited.add(nxt)
                dfs(nxt, visited, total)
                visited.remove(nxt)

    dfs(origin, {origin}, 0.0)
    return best[0]


def greedy_reference(waiting, vehicles, net) -> list[tuple[int, int]]:
    """Sequential greedy matching reimplemented from scratch.

    Returns (vehicle_id, request_id) pairs using travel-time distances from
    the exhaustive oracle, FIFO request order, and lowest-id tie-breaks.
    """
    free = {v.id: v for v in vehicles if v.status == "free"}
    pairs = []
    for req in sorted(waiting, key=lambda r: (r.activation_t, r.id)):
        best_key = None
        best_vid = None
        for vid in sorted(free):
            veh = free[vid]
            if veh.capacity < req.n_pass:
                continue
            d = enumerate_shortest(net, veh.position_node, req.origin_node)
            if d is None:
                continue
            if enumerate_shortest(net, req.origin_node, req.dest_node) is None:
                continue
            if best_key is None or d < best_key:
                best_key = d
                best_vid = vid
        if best_vid is not None:
            pairs.append((best_vid, req.id))
            del free[best_vid]
    return pairs


def random_digraph(rng, n_max: int = 8):
    """Random directed graph with small integer weights (exact float sums)."""
    from fleetsim.network import RoutingNetwork

    n = int(rng.integers(2, n_max + 1))
    nodes = [(f"v{i}", float(rng.uniform(0, 10)), float(rng.uniform(0, 10)))
             for i in range(n)]
    edges = []
    for i in range(n):
        for j in range(n):
            if i != j and rng.random() < 0.4:
                edges.append((f"v{i}", f"v{j}", float(rng.integers(1, 10))))
    return RoutingNetwork(nodes, edges)


def line_network(n: int = 5, leg_minutes: float = 2.0):
    """n nodes in a row, bidirectional edges of equal travel time."""
    from fleetsim.network import RoutingNetwork

    nodes = [(f"n{i}", float(i) * 0.5, 0.0) for i in range(n)]
    edges = []
    for i in range(n - 1):
        edges.append((f"n{i}", f"n{i+1}", leg_minutes))
        edges.append((f"n{i+1}", f"n{i}", leg_minutes))
    return RoutingNetwork(nodes, edges)


def manual_scenario(net, trips, vehicle_nodes, horizon_steps=120, max_wait=30,
                    dt_rebalance=60, grid=None, seed=0):
    """Scenario with explicit vehicle placement for hand-traced tests."""
    import numpy as np

    from fleetsim.domain import Vehicle
    from fleetsim.grid import GridSpec
    from fleetsim.scenario import Scenario

    if grid is None:
        pad = 0.3
        xs, ys = net.coords[:, 0], net.coords[:, 1]
        grid = GridSpec(2, 2, float(xs.min()) - pad, float(xs.max()) + pad,
                        float(ys.min()) - pad, float(ys.max()) + pad)
    vehicles = [Vehicle(id=i, position_node=net.index_of[nid])
                for i, nid in enumerate(vehicle_nodes)]
    return Scenario(name="manual", net=net, grid_spec=grid, trips=list(trips),
                    vehicles=vehicles, fleet_size=len(vehicles), seed=seed,
                    policy_seed=np.random.SeedSequence(seed),
                    horizon_steps=horizon_steps, max_wait=max_wait,
                    dt_rebalance=dt_rebalance)
