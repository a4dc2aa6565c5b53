"""Pydantic request/response models for the HTTP service."""

from __future__ import annotations

from pydantic import BaseModel, Field


class RunRequest(BaseModel):
    scenario: str | None = None
    config: dict | None = None
    policy: str
    seeds: list[int]
    policy_params: dict | None = None


class RunRow(BaseModel):
    run_id: str
    seed: int
    policy: str
    total_wait_pass_min: int
    mean_wait_min: float
    failed: int
    served: int


class RunAggregate(BaseModel):
    policy: str
    seeds: int
    mean_wait_min: float
    std_wait_min: float
    nr_mean_wait_min: float
    e_nr_pct: float


class PerRequestRow(BaseModel):
    policy: str
    seed: int
    request_id: int
    wait_min: int


class RunResponse(BaseModel):
    rows: list[RunRow]
    aggregate: RunAggregate
    per_request: list[PerRequestRow]


class SweepRequest(BaseModel):
    scenario: str | None = None
    config: dict | None = None
    sizes: list[int]
    policies: list[str]
    seeds: list[int]


class SweepRow(RunRow):
    fleet_size: int


class SweepSummaryRow(BaseModel):
    fleet_size: int
    policy: str
    mean_wait_min: float
    std_wait_min: float


class SweepResponse(BaseModel):
    rows: list[SweepRow]
    summary: list[SweepSummaryRow]


class RecordRequest(BaseModel):
    scenario: str | None = None
    config: dict | None = None
    seeds: list[int]


class Recording(BaseModel):
    scenario: str
    seed: int
    n_x: int
    n_y: int
    total_trips: int
    matrices: list[list[int]]


class RecordResponse(BaseModel):
    recordings: dict[int, Recording]


class SessionCreate(BaseModel):
    scenario: str
    seed: int = 0


class Observation(BaseModel):
    V: list[int]
    R: list[int]
    t_norm: float
    reward: float
    done: bool


class SessionState(Observation):
    session_id: str


class StepRequest(BaseModel):
    action: list[float] = Field(description="row-major n_x*n_y matrix entries")


class ScenarioList(BaseModel):
    scenarios: list[str]


class Health(BaseModel):
    status: str = "ok"
