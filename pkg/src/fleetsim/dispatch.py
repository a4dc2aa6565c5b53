"""Greedy dispatch: assign each waiting request to the nearest feasible
free vehicle, in request FIFO order.

The dispatcher is deliberately simple and treated as a black box by the
rest of the system; anything producing Assignments from (waiting requests,
vehicles, network) can replace it. Distance defaults to network travel
time; straight-line distance over node coordinates is available behind the
same interface for comparison.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .domain import FREE, Request, Vehicle
from .network import Path, RoutingNetwork, Unreachable, shortest_path

TRAVEL_TIME = "travel_time"
EUCLIDEAN = "euclidean"
DISPATCH_METRICS = (TRAVEL_TIME, EUCLIDEAN)


@dataclass
class Assignment:
    vehicle_id: int
    request_id: int
    pickup_path: Path
    dropoff_path: Path


@dataclass
class Leg:
    """One directed edge traversal with time left to run."""

    frm: int
    to: int
    time_min: float
    remaining: float


@dataclass
class Itinerary:
    """Executable plan for a vehicle: pickup legs then dropoff legs.

    pickup occurs after pickup_leg_count legs complete; for rebalance
    requests there are no dropoff legs and the vehicle frees on arrival.
    Zero-length plans complete immediately.
    """

    request_id: int
    is_rebalance: bool
    legs: list[Leg]
    pickup_leg_count: int
    legs_done: int = 0

    @property
    def finished(self) -> bool:
        return self.legs_done >= len(self.legs)


def _euclid(net: RoutingNetwork, a: int, b: int) -> float:
    dx = net.coords[a, 0] - net.coords[b, 0]
    dy = net.coords[a, 1] - net.coords[b, 1]
    return math.hypot(dx, dy)


def dispatch_greedy(waiting: list[Request], vehicles: list[Vehicle],
                    net: RoutingNetwork, metric: str = TRAVEL_TIME) -> list[Assignment]:
    """Sequential greedy matching.

    Requests are processed in (activation_t, id) order; each takes the free
    vehicle with sufficient capacity that minimizes the distance metric to
    its origin, ties to the lowest vehicle id. Matched vehicles leave the
    pool immediately, so later requests see only what remains. Requests with
    no feasible vehicle are left unassigned.
    """
    if metric not in DISPATCH_METRICS:
        raise ValueError(f"unknown dispatch metric {metric!r}")
    pool = [v for v in vehicles if v.status == FREE]
    order = sorted(waiting, key=lambda r: (r.activation_t, r.id))
    assignments: list[Assignment] = []
    for req in order:
        ranked = []
        for veh in pool:
            if veh.capacity < req.n_pass:
                continue
            if metric == TRAVEL_TIME:
                d = net.travel_time(veh.position_node, req.origin_node)
                if not math.isfinite(d):
                    continue
            else:
                d = _euclid(net, veh.position_node, req.origin_node)
            ranked.append((d, veh.id, veh))
        ranked.sort(key=lambda item: (item[0], item[1]))
        chosen = None
        for _, _, veh in ranked:
            try:
                pickup = shortest_path(net, veh.position_node, req.origin_node)
                dropoff = (Path([req.origin_node], []) if req.is_rebalance
                           else shortest_path(net, req.origin_node, req.dest_node))
            except Unreachable:
                continue
            chosen = (veh, pickup, dropoff)
            break
        if chosen is None:
            continue
        veh, pickup, dropoff = chosen
        pool.remove(veh)
        assignments.append(Assignment(vehicle_id=veh.id, request_id=req.id,
                                      pickup_path=pickup, dropoff_path=dropoff))
    return assignments


def build_itinerary(assignment: Assignment, is_rebalance: bool) -> Itinerary:
    """Turn an assignment's paths into an executable leg sequence."""
    legs = []
    for path in (assignment.pickup_path, assignment.dropoff_path):
        seq, times = path.node_sequence, path.leg_times
        for i, t in enumerate(times):
            legs.append(Leg(frm=seq[i], to=seq[i + 1], time_min=t, remaining=t))
    return Itinerary(request_id=assignment.request_id, is_rebalance=is_rebalance,
                     legs=legs, pickup_leg_count=len(assignment.pickup_path.leg_times))
