"""Environment service speaking a line-delimited JSON protocol.

External trainers drive rebalancing episodes through reset/step semantics:
one JSON object per line, UTF-8, fields drawn from the fixed vocabulary
kind, scenario, seed, V, R, t_norm, action, reward, done, code.

  client: {"kind": "reset", "scenario": "canonical", "seed": 0}
  server: {"kind": "reset_ok", "V": [...], "R": [...], "t_norm": 0.0,
           "reward": 0.0, "done": false}
  client: {"kind": "step", "action": [0.0, ...]}        # n_x * n_y reals
  server: {"kind": "step_ok", "V": [...], "R": [...], "t_norm": ...,
           "reward": ..., "done": ...}
  client: {"kind": "close"}
  server: {"kind": "close"}

V and R are the row-major flattened count matrices of the observation; the
reward is the raw negated passenger-minutes of the elapsed rebalance
interval, with no normalization. The observation before the first step has
an all-zero R since no interval has elapsed yet. Each step advances exactly
one rebalance interval, so an episode is horizon / dt_rebalance steps; done
turns true on the last one and further steps are refused until the next
reset. Malformed or out-of-order messages get {"kind": "error", "code":
...} with code PARSE, BAD_STATE, BAD_SHAPE, or UNKNOWN_SCENARIO, and the
session stays alive. A session serves one episode at a time; trainers
parallelize by opening concurrent sessions.
"""

from __future__ import annotations

import json
import math
import socket
import socketserver
import sys
import threading
from dataclasses import dataclass
from pathlib import Path as FilePath

import numpy as np

from . import engine
from .grid import flatten
from .rebalance import RebalanceObservation, action_to_requests
from .network import CellNodeIndex
from .scenario import Scenario, load_config, build_scenario

RESET = "reset"
RESET_OK = "reset_ok"
STEP = "step"
STEP_OK = "step_ok"
ERROR = "error"
CLOSE = "close"

E_PARSE = "PARSE"
E_BAD_STATE = "BAD_STATE"
E_BAD_SHAPE = "BAD_SHAPE"
E_UNKNOWN_SCENARIO = "UNKNOWN_SCENARIO"


class ProtocolError(Exception):
    def __init__(self, code: str):
        super().__init__(code)
        self.code = code


@dataclass
class ProtocolMessage:
    kind: str
    scenario: str | None = None
    seed: int | None = None
    V: list[int] | None = None
    R: list[int] | None = None
    t_norm: float | None = None
    action: list[float] | None = None
    reward: float | None = None
    done: bool | None = None
    code: str | None = None


def _require(cond: bool) -> None:
    if not cond:
        raise ProtocolError(E_PARSE)


def decode(line: str) -> ProtocolMessage:
    """Parse one wire line; raises ProtocolError(PARSE) when malformed."""
    try:
        payload = json.loads(line)
    except (json.JSONDecodeError, UnicodeDecodeError):
        raise ProtocolError(E_PARSE) from None
    _require(isinstance(payload, dict))
    kind = payload.get("kind")
    if kind == RESET:
        _require(set(payload) == {"kind", "scenario", "seed"})
        _require(isinstance(payload["scenario"], str))
        _require(isinstance(payload["seed"], int) and not isinstance(payload["seed"], bool))
        return ProtocolMessage(kind=RESET, scenario=payload["scenario"], seed=payload["seed"])
    if kind == STEP:
        _require(set(payload) == {"kind", "action"})
        action = payload["action"]
        _require(isinstance(action, list)
                 and all(isinstance(v, (int, float)) and not isinstance(v, bool)
                         for v in action))
        return ProtocolMessage(kind=STEP, action=[float(v) for v in action])
    if kind in (RESET_OK, STEP_OK):
        _require(set(payload) == {"kind", "V", "R", "t_norm", "reward", "done"})
        for key in ("V", "R"):
            _require(isinstance(payload[key], list)
                     and all(isinstance(v, int) and not isinstance(v, bool)
                             for v in payload[key]))
        _require(isinstance(payload["t_norm"], (int, float)))
        _require(isinstance(payload["reward"], (int, float)))
        _require(isinstance(payload["done"], bool))
        return ProtocolMessage(kind=kind, V=payload["V"], R=payload["R"],
                               t_norm=float(payload["t_norm"]),
                               reward=float(payload["reward"]), done=payload["done"])
    if kind == ERROR:
        _require(set(payload) == {"kind", "code"})
        _require(payload["code"] in (E_PARSE, E_BAD_STATE, E_BAD_SHAPE, E_UNKNOWN_SCENARIO))
        return ProtocolMessage(kind=ERROR, code=payload["code"])
    if kind == CLOSE:
        _require(set(payload) == {"kind"})
        return ProtocolMessage(kind=CLOSE)
    raise ProtocolError(E_PARSE)


def encode(msg: ProtocolMessage) -> str:
    """Canonical single-line encoding; encode(decode(x)) == x for valid x."""
    if msg.kind == RESET:
        payload = {"kind": RESET, "scenario": msg.scenario, "seed": msg.seed}
    elif msg.kind == STEP:
        payload = {"kind": STEP, "action": msg.action}
    elif msg.kind in (RESET_OK, STEP_OK):
        payload = {"kind": msg.kind, "V": msg.V, "R": msg.R, "t_norm": msg.t_norm,
                   "reward": msg.reward, "done": msg.done}
    elif msg.kind == ERROR:
        payload = {"kind": ERROR, "code": msg.code}
    elif msg.kind == CLOSE:
        payload = {"kind": CLOSE}
    else:
        raise ValueError(f"unknown message kind {msg.kind!r}")
    return json.dumps(payload, separators=(",", ":"))


class ScenarioCatalog:
    """Named scenario configs served to sessions."""

    def __init__(self, configs: dict[str, dict]):
        if not configs:
            raise ValueError("scenario catalog is empty")
        self.configs = configs

    @classmethod
    def from_dir(cls, directory) -> "ScenarioCatalog":
        configs = {}
        for path in sorted(FilePath(directory).glob("*.yaml")):
            cfg = load_config(path)
            configs[cfg["name"]] = cfg
        return cls(configs)

    def names(self) -> list[str]:
        return sorted(self.configs)

    def build(self, name: str, seed: int) -> Scenario:
        if name not in self.configs:
            raise KeyError(name)
        return build_scenario(self.configs[name], seed=seed)


class EnvSession:
    """One client's episode state machine.

    Message handling within a session is strictly serial; concurrent
    sessions are fully isolated because each owns its world state.
    """

    def __init__(self, catalog: ScenarioCatalog):
        self.catalog = catalog
        self.world: engine.WorldState | None = None
        self.scenario: Scenario | None = None
        self.last_obs: RebalanceObservation | None = None
        self.done = True
        self._cell_index: CellNodeIndex | None = None

    def _observation_reply(self, kind: str, reward: float) -> ProtocolMessage:
        obs = engine.observe(self.world)
        self.last_obs = obs
        return ProtocolMessage(kind=kind, V=flatten(obs.V), R=flatten(obs.R),
                               t_norm=obs.t_norm, reward=reward, done=self.done)

    def handle_reset(self, msg: ProtocolMessage) -> ProtocolMessage:
        try:
            scenario = self.catalog.build(msg.scenario, msg.seed)
        except KeyError:
            return ProtocolMessage(kind=ERROR, code=E_UNKNOWN_SCENARIO)
        horizon = scenario.horizon_steps * scenario.dt_sim
        if horizon % scenario.dt_rebalance != 0:
            return ProtocolMessage(kind=ERROR, code=E_UNKNOWN_SCENARIO)
        self.scenario = scenario
        self.world = engine.init_world(scenario)
        self._cell_index = CellNodeIndex(scenario.net, scenario.grid_spec)
        self.done = False
        return self._observation_reply(RESET_OK, reward=0.0)

    def handle_step(self, msg: ProtocolMessage) -> ProtocolMessage:
        if self.world is None or self.done:
            return ProtocolMessage(kind=ERROR, code=E_BAD_STATE)
        sc = self.scenario
        n_cells = sc.grid_spec.n_x * sc.grid_spec.n_y
        if len(msg.action) != n_cells or not all(math.isfinite(v) for v in msg.action):
            return ProtocolMessage(kind=ERROR, code=E_BAD_SHAPE)
        action = np.asarray(msg.action, dtype=float).reshape(sc.grid_spec.n_x,
                                                             sc.grid_spec.n_y)
        world = self.world
        injected = _InjectedActionPolicy(action, self.last_obs, self._cell_index)
        reward = 0
        for _ in range(sc.dt_rebalance // sc.dt_sim):
            engine.step(world, injected)
            reward += engine.interval_reward(world)
        self.done = world.clock.t >= world.clock.horizon
        return self._observation_reply(STEP_OK, reward=float(reward))

    def handle_line(self, line: str) -> tuple[ProtocolMessage, bool]:
        """Process one wire line; returns (reply, keep_session_alive)."""
        try:
            msg = decode(line)
        except ProtocolError as exc:
            return ProtocolMessage(kind=ERROR, code=exc.code), True
        if msg.kind == RESET:
            return self.handle_reset(msg), True
        if msg.kind == STEP:
            return self.handle_step(msg), True
        if msg.kind == CLOSE:
            return ProtocolMessage(kind=CLOSE), False
        # reset_ok/step_ok/error are server-to-client kinds
        return ProtocolMessage(kind=ERROR, code=E_BAD_STATE), True

    def final_metrics(self) -> engine.EpisodeMetrics:
        """Episode accounting for the current world (in-process callers)."""
        if self.world is None:
            raise ValueError("no episode")
        return engine.finalize_metrics(self.world)


class _InjectedActionPolicy:
    """Feeds an externally supplied action matrix into the engine's
    rebalance event, using the observation the client actually saw for the
    free-vehicle clamp."""

    def __init__(self, action: np.ndarray, obs: RebalanceObservation,
                 cell_index: CellNodeIndex):
        self.action = action
        self.obs = obs
        self.cell_index = cell_index
        self.used = False

    def plan(self, obs, ctx):
        if self.used:
            return []
        self.used = True
        return action_to_requests(self.action, self.obs, ctx, self.cell_index)


class _SessionHandler(socketserver.StreamRequestHandler):
    def handle(self) -> None:
        session = EnvSession(self.server.catalog)
        while True:
            raw = self.rfile.readline()
            if not raw:
                return
            line = raw.decode("utf-8", errors="replace").strip()
            if not line:
                continue
            reply, alive = session.handle_line(line)
            self.wfile.write((encode(reply) + "\n").encode("utf-8"))
            self.wfile.flush()
            if not alive:
                return


class EnvServer(socketserver.ThreadingTCPServer):
    """Threaded TCP server: one thread and one session per connection."""

    allow_reuse_address = True
    daemon_threads = True

    def __init__(self, address: tuple[str, int], catalog: ScenarioCatalog):
        super().__init__(address, _SessionHandler)
        self.catalog = catalog


def start_background(host: str, port: int, catalog: ScenarioCatalog) -> EnvServer:
    """Bind and serve on a daemon thread; caller owns shutdown()."""
    server = EnvServer((host, port), catalog)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    return server


def serve_stdio(catalog: ScenarioCatalog, stdin=None, stdout=None) -> None:
    """Single session over stdin/stdout, one message per line."""
    stdin = stdin or sys.stdin
    stdout = stdout or sys.stdout
    session = EnvSession(catalog)
    for raw in stdin:
        line = raw.strip()
        if not line:
            continue
        reply, alive = session.handle_line(line)
        stdout.write(encode(reply) + "\n")
        stdout.flush()
        if not alive:
            return


class EnvClient:
    """Small line-protocol client used by the CLI and tests."""

    def __init__(self, host: str, port: int, timeout: float = 120.0):
        self.sock = socket.create_connection((host, port), timeout=timeout)
        self.rfile = self.sock.makefile("r", encoding="utf-8")

    def request(self, msg: ProtocolMessage) -> ProtocolMessage:
        self.sock.sendall((encode(msg) + "\n").encode("utf-8"))
        line = self.rfile.readline()
        if not line:
            raise ConnectionError("server closed the connection")
        return decode(line)

    def reset(self, scenario: str, seed: int) -> ProtocolMessage:
        return self.request(ProtocolMessage(kind=RESET, scenario=scenario, seed=seed))

    def step(self, action: list[float]) -> ProtocolMessage:
        return self.request(ProtocolMessage(kind=STEP, action=action))

    def close(self) -> None:
        try:
            self.request(ProtocolMessage(kind=CLOSE))
        except (ConnectionError, OSError):
            pass
        self.rfile.close()
        self.sock.close()
