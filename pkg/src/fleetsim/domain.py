"""Core entity types shared by the simulator: requests, vehicles, and the clock.

Time is integer minutes throughout; there are no sub-minute events. A request
moves through the status machine waiting -> assigned -> occupying -> delivered,
or waiting -> failed when it times out. Wait time accrues only while waiting,
so a request's final wait is the time from activation to vehicle assignment.
"""

from __future__ import annotations

from dataclasses import dataclass, field


WAITING = "waiting"
ASSIGNED = "assigned"
OCCUPYING = "occupying"
DELIVERED = "delivered"
FAILED = "failed"

REQUEST_STATUSES = (WAITING, ASSIGNED, OCCUPYING, DELIVERED, FAILED)

# Legal edges of the request status machine (a DAG: each status visited at
# most once along any legal trajectory).
_LEGAL_TRANSITIONS = {
    (WAITING, ASSIGNED),
    (ASSIGNED, OCCUPYING),
    (OCCUPYING, DELIVERED),
    (WAITING, FAILED),
}

FREE = "free"
OCCUPIED = "occupied"


class IllegalTransition(Exception):
    """Raised when a request status change is not a legal machine edge."""


class ClockError(ValueError):
    """Raised when clock intervals violate the divisibility chain."""


@dataclass
class SimClock:
    """Episode clock. All intervals are integer minutes.

    dt_dispatch must be a positive integer multiple of dt_sim and
    dt_rebalance a positive integer multiple of dt_dispatch.
    """

    dt_sim: int = 1
    dt_dispatch: int = 1
    dt_rebalance: int = 60
    horizon_steps: int = 1440
    t: int = 0

    def __post_init__(self) -> None:
        if self.dt_sim <= 0 or self.dt_dispatch <= 0 or self.dt_rebalance <= 0:
            raise ClockError("clock intervals must be positive")
        if self.dt_dispatch % self.dt_sim != 0:
            raise ClockError(
                f"dt_dispatch={self.dt_dispatch} is not a multiple of dt_sim={self.dt_sim}"
            )
        if self.dt_rebalance % self.dt_dispatch != 0:
            raise ClockError(
                f"dt_rebalance={self.dt_rebalance} is not a multiple of dt_dispatch={self.dt_dispatch}"
            )
        if self.horizon_steps <= 0:
            raise ClockError("horizon_steps must be positive")
        if not 0 <= self.t <= self.horizon:
            raise ClockError("t outside [0, horizon]")

    @property
    def horizon(self) -> int:
        """Episode length in minutes."""
        return self.horizon_steps * self.dt_sim

    def advance(self) -> None:
        if self.t + self.dt_sim > self.horizon:
            raise ClockError("advance past horizon")
        self.t += self.dt_sim


@dataclass
class Request:
    """A trip demand entity.

    Rebalance requests are phantoms used to reposition free vehicles: they
    carry no passengers and have identical origin and destination.
    """

    id: int
    origin_node: int
    dest_node: int
    activation_t: int
    n_pass: int = 1
    max_wait: int = 30
    status: str = WAITING
    accumulated_wait: int = 0
    is_rebalance: bool = False

    def __post_init__(self) -> None:
        if self.n_pass < 0:
            raise ValueError("n_pass must be nonnegative")
        if self.is_rebalance:
            if self.n_pass != 0:
                raise ValueError("rebalance requests carry no passengers")
            if self.origin_node != self.dest_node:
                raise ValueError("rebalance requests have origin == destination")


@dataclass
class Vehicle:
    """A capacitated fleet unit. Free means idle: status is free iff the
    itinerary is empty."""

    id: int
    position_node: int
    capacity: int = 4
    status: str = FREE
    itinerary: list = field(default_factory=list)
    serving_request_id: int | None = None

    def __post_init__(self) -> None:
        if self.capacity < 1:
            raise ValueError("capacity must be >= 1")


def transition_request(request: Request, new_status: str) -> Request:
    """Apply a status transition, enforcing the machine's legal edges.

    Returns the same request with the new status; all other fields are left
    untouched (wait accrual is the engine's job and happens only in waiting).
    """
    if new_status not in REQUEST_STATUSES:
        raise IllegalTransition(f"unknown status {new_status!r}")
    edge = (request.status, new_status)
    if edge not in _LEGAL_TRANSITIONS:
        raise IllegalTransition(f"illegal transition {request.status} -> {new_status}")
    request.status = new_status
    return request
