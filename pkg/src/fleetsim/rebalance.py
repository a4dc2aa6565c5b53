"""Rebalancing policies and the action-matrix contract.

A policy is queried once per rebalance interval with a distributional
observation (free-vehicle counts V, waiting-request counts R over the
preceding interval, normalized time) and returns a set of rebalance
requests: phantom trips with zero passengers and identical origin and
destination. Dispatching a phantom drives a free vehicle to its node, where
the vehicle immediately frees again.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .domain import Request
from .grid import GridSpec, cell_of, disaggregate
from .network import CellNodeIndex, RoutingNetwork, nearest_node


class MissingRecord(Exception):
    """Recorded rebalance sets do not cover the requested step."""


class ShapeMismatch(Exception):
    """Action matrix shape differs from the grid."""


@dataclass
class RebalanceObservation:
    """State snapshot handed to policies and external trainers.

    V counts free vehicles per cell at the rebalance instant; R counts the
    origins of real requests that waited at any point during the preceding
    rebalance interval; t_norm is elapsed episode fraction in [0, 1].
    """

    V: np.ndarray
    R: np.ndarray
    t_norm: float


@dataclass
class RebalanceContext:
    """Engine-side services available to a policy during one query."""

    now: int
    rebalance_index: int
    scenario: object
    net: RoutingNetwork
    grid_spec: GridSpec
    rng: np.random.Generator
    free_count: int
    make_request: Callable[[int], Request]


class PolicyNR:
    """No rebalance: the fleet distribution evolves from dispatch alone."""

    name = "nr"

    def plan(self, obs: RebalanceObservation, ctx: RebalanceContext) -> list[Request]:
        return []


class PolicyRR:
    """Uniform random rebalance, a deliberately naive baseline.

    Draws k uniform in {0..free_count}, then k positions uniform over the
    operating area, snapped to their nearest nodes.
    """

    name = "rr"

    def plan(self, obs: RebalanceObservation, ctx: RebalanceContext) -> list[Request]:
        k = int(ctx.rng.integers(0, ctx.free_count + 1))
        spec = ctx.grid_spec
        out = []
        for _ in range(k):
            x = spec.x_min + ctx.rng.random() * (spec.x_max - spec.x_min)
            y = spec.y_min + ctx.rng.random() * (spec.y_max - spec.y_min)
            out.append(ctx.make_request(nearest_node(ctx.net, x, y)))
        return out


class PolicySARStar:
    """Anticipatory rebalance with perfect next-interval knowledge: one
    phantom at the origin of every trip activating in the upcoming
    rebalance interval."""

    name = "sar_star"

    def plan(self, obs: RebalanceObservation, ctx: RebalanceContext) -> list[Request]:
        trips = ctx.scenario.trips
        times = [t.pickup_t for t in trips]
        lo = bisect.bisect_right(times, ctx.now)
        hi = bisect.bisect_right(times, ctx.now + ctx.scenario.dt_rebalance)
        return [ctx.make_request(trips[i].origin_node) for i in range(lo, hi)]


def round_half_up(values: np.ndarray) -> np.ndarray:
    return np.floor(np.asarray(values, dtype=float) + 0.5).astype(int)


def _requests_from_counts(counts: np.ndarray, ctx: RebalanceContext,
                          cell_index: CellNodeIndex) -> list[Request]:
    """Disaggregate per-cell counts to uniform positions and snap each to a
    node of its own cell, preserving the aggregate exactly."""
    out = []
    for x, y in disaggregate(ctx.grid_spec, counts, ctx.rng):
        m, n = cell_of(ctx.grid_spec, x, y)
        out.append(ctx.make_request(cell_index.snap(m, n, x, y)))
    return out


class PolicyTSAR:
    """Replay of recorded anticipatory rebalance sets, rescaled.

    scale is the target-to-reference trip-total ratio; per-cell counts are
    rounded half up and disaggregated back to positions.
    """

    name = "t_sar"

    def __init__(self, recorded_sets: list[np.ndarray], scale: float = 1.0):
        self.recorded_sets = [np.asarray(m, dtype=int) for m in recorded_sets]
        self.scale = float(scale)
        self._cell_index: CellNodeIndex | None = None

    def plan(self, obs: RebalanceObservation, ctx: RebalanceContext) -> list[Request]:
        if ctx.rebalance_index >= len(self.recorded_sets):
            raise MissingRecord(
                f"no recorded set for rebalance step {ctx.rebalance_index}")
        if self._cell_index is None:
            self._cell_index = CellNodeIndex(ctx.net, ctx.grid_spec)
        counts = round_half_up(self.recorded_sets[ctx.rebalance_index] * self.scale)
        return _requests_from_counts(counts, ctx, self._cell_index)


def action_to_requests(action: np.ndarray, obs: RebalanceObservation,
                       ctx: RebalanceContext,
                       cell_index: CellNodeIndex | None = None) -> list[Request]:
    """Convert a real-valued action matrix into rebalance requests.

    Entries are clamped to >= 0 and rounded half up. If the rounded total
    exceeds the free-vehicle count sum(V), counts are scaled down
    proportionally and re-rounded by largest remainder (ties to the earlier
    row-major cell) so the total lands exactly on sum(V).
    """
    action = np.asarray(action, dtype=float)
    spec = ctx.grid_spec
    if action.shape != (spec.n_x, spec.n_y):
        raise ShapeMismatch(
            f"action shape {action.shape} != grid {(spec.n_x, spec.n_y)}")
    counts = round_half_up(np.maximum(action, 0.0))
    total = int(counts.sum())
    budget = int(np.asarray(obs.V).sum())
    if total > budget:
        scaled = counts.astype(float) * (budget / total)
        base = np.floor(scaled).astype(int)
        frac = (scaled - base).reshape(-1)
        missing = budget - int(base.sum())
        if missing > 0:
            order = sorted(range(frac.size), key=lambda i: (-frac[i], i))
            flat = base.reshape(-1)
            for i in order[:missing]:
                flat[i] += 1
            base = flat.reshape(base.shape)
        counts = base
    if cell_index is None:
        cell_index = CellNodeIndex(ctx.net, ctx.grid_spec)
    return _requests_from_counts(counts, ctx, cell_index)


class ExternalActionPolicy:
    """Replay a fixed sequence of action matrices through the same clamp,
    round, and disaggregation contract used for live trainers."""

    name = "external"

    def __init__(self, actions: list[np.ndarray]):
        self.actions = [np.asarray(a, dtype=float) for a in actions]
        self._cell_index: CellNodeIndex | None = None

    def plan(self, obs: RebalanceObservation, ctx: RebalanceContext) -> list[Request]:
        if ctx.rebalance_index >= len(self.actions):
            raise MissingRecord(f"no action for rebalance step {ctx.rebalance_index}")
        if self._cell_index is None:
            self._cell_index = CellNodeIndex(ctx.net, ctx.grid_spec)
        return action_to_requests(self.actions[ctx.rebalance_index], obs, ctx,
                                  self._cell_index)
