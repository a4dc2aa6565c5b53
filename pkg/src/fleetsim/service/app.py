"""FastAPI service wrapping the simulator.

Experiment endpoints accept either a catalog scenario name or an inline
config mapping and run synchronously. Environment sessions mirror the line
protocol's reset/step semantics over HTTP for multi-client trainers that
prefer it; the TCP line protocol remains available via the CLI's serve
command.
"""

from __future__ import annotations

import threading
import uuid

from fastapi import FastAPI, HTTPException

from .. import experiments
from ..envserver import (E_BAD_SHAPE, E_BAD_STATE, E_UNKNOWN_SCENARIO, ERROR,
                         STEP, EnvSession, ProtocolMessage, ScenarioCatalog)
from ..scenario import _CONFIG_DEFAULTS
from . import models

_HTTP_STATUS = {E_UNKNOWN_SCENARIO: 404, E_BAD_STATE: 409, E_BAD_SHAPE: 422}


def _resolve_config(catalog: ScenarioCatalog | None, scenario: str | None,
                    config: dict | None) -> dict:
    if config is not None:
        cfg = dict(_CONFIG_DEFAULTS)
        unknown = set(config) - set(cfg)
        if unknown:
            raise HTTPException(422, f"unknown config keys: {sorted(unknown)}")
        cfg.update(config)
        if cfg["name"] is None:
            cfg["name"] = "inline"
        return cfg
    if scenario is not None:
        if catalog is None or scenario not in catalog.configs:
            raise HTTPException(404, f"unknown scenario {scenario!r}")
        return catalog.configs[scenario]
    raise HTTPException(422, "either scenario or config is required")


class _Sessions:
    """HTTP session registry; per-session locks keep handling serial."""

    def __init__(self, catalog: ScenarioCatalog):
        self.catalog = catalog
        self.lock = threading.Lock()
        self.sessions: dict[str, tuple[EnvSession, threading.Lock]] = {}

    def create(self) -> tuple[str, EnvSession, threading.Lock]:
        sid = uuid.uuid4().hex
        session = EnvSession(self.catalog)
        lock = threading.Lock()
        with self.lock:
            self.sessions[sid] = (session, lock)
        return sid, session, lock

    def get(self, sid: str) -> tuple[EnvSession, threading.Lock]:
        with self.lock:
            if sid not in self.sessions:
                raise HTTPException(404, "unknown session")
            return self.sessions[sid]

    def drop(self, sid: str) -> None:
        with self.lock:
            self.sessions.pop(sid, None)


def _obs_payload(reply: ProtocolMessage) -> dict:
    if reply.kind == ERROR:
        raise HTTPException(_HTTP_STATUS.get(reply.code, 400), reply.code)
    return {"V": reply.V, "R": reply.R, "t_norm": reply.t_norm,
            "reward": reply.reward, "done": reply.done}


def create_app(catalog: ScenarioCatalog | None = None) -> FastAPI:
    app = FastAPI(title="fleetsim", version="0.1.0")
    sessions = _Sessions(catalog) if catalog is not None else None

    @app.get("/healthz", response_model=models.Health)
    def healthz():
        return models.Health()

    @app.get("/scenarios", response_model=models.ScenarioList)
    def scenarios():
        return models.ScenarioList(scenarios=catalog.names() if catalog else [])

    @app.post("/runs", response_model=models.RunResponse)
    def runs(req: models.RunRequest):
        cfg = _resolve_config(catalog, req.scenario, req.config)
        try:
            result = experiments.run_batch(cfg, req.policy, req.seeds,
                                           req.policy_params)
        except ValueError as exc:
            raise HTTPException(422, str(exc)) from None
        return models.RunResponse(rows=result.rows, aggregate=result.aggregate,
                                  per_request=result.per_request)

    @app.post("/fleet-sweeps", response_model=models.SweepResponse)
    def fleet_sweeps(req: models.SweepRequest):
        cfg = _resolve_config(catalog, req.scenario, req.config)
        try:
            sweep = experiments.sweep_fleet(cfg, req.sizes, req.policies, req.seeds)
        except ValueError as exc:
            raise HTTPException(422, str(exc)) from None
        return models.SweepResponse(**sweep)

    @app.post("/sar-recordings", response_model=models.RecordResponse)
    def sar_recordings(req: models.RecordRequest):
        cfg = _resolve_config(catalog, req.scenario, req.config)
        return models.RecordResponse(recordings=experiments.record_sar(cfg, req.seeds))

    @app.post("/sessions", response_model=models.SessionState)
    def create_session(req: models.SessionCreate):
        if sessions is None:
            raise HTTPException(404, "no scenario catalog configured")
        sid, session, lock = sessions.create()
        with lock:
            reply = session.handle_reset(
                ProtocolMessage(kind="reset", scenario=req.scenario, seed=req.seed))
        try:
            payload = _obs_payload(reply)
        except HTTPException:
            sessions.drop(sid)
            raise
        return models.SessionState(session_id=sid, **payload)

    @app.post("/sessions/{sid}/step", response_model=models.Observation)
    def step_session(sid: str, req: models.StepRequest):
        if sessions is None:
            raise HTTPException(404, "no scenario catalog configured")
        session, lock = sessions.get(sid)
        with lock:
            reply = session.handle_step(
                ProtocolMessage(kind=STEP, action=[float(v) for v in req.action]))
        return models.Observation(**_obs_payload(reply))

    @app.delete("/sessions/{sid}", response_model=models.Health)
    def close_session(sid: str):
        if sessions is None:
            raise HTTPException(404, "no scenario catalog configured")
        sessions.get(sid)
        sessions.drop(sid)
        return models.Health()

    return app
