"""Live session gateway: bridges one simulation to one operator console.

The server paces the simulation against the wall clock (a `speed`
multiplier compresses demo time), streams state snapshots at 10 Hz, and
routes every client command through the same validation path a headless
run uses. All state mutation enters through the engine's timestamped
command queue; snapshots are read-only projections. Messages travel as
length-prefixed JSON frames (see `wire`) inside binary WebSocket messages.

A client protocol violation closes that connection with an error frame;
the simulation keeps running headless and still logs a clean trial end.
"""

from __future__ import annotations

import asyncio
import time
from pathlib import Path

import websockets

from . import events as ev
from . import wire
from .commands import Command, CommandKind
from .core import DynamicsParams, ModelKind, ROMAN_IDS
from .probes import component_level_plans
from .trial import TrialRunner

SNAPSHOT_HZ = 10.0
DEFAULT_PROBE_TIMEOUT_S = 30.0     # sim seconds an operator gets per probe


class SessionGateway:
    def __init__(
        self,
        difficulty: str = "easy",
        scenario_seed: int = 1,
        model: ModelKind = ModelKind.M2,
        seed: int = 1,
        params: DynamicsParams | None = None,
        view: str = "ia",
        speed: float = 1.0,
        host: str = "127.0.0.1",
        port: int = 0,
        probes: bool = True,
        probe_timeout_s: float = DEFAULT_PROBE_TIMEOUT_S,
        out_path: str | Path | None = None,
        config=None,
    ):
        if view not in ("ia", "collective"):
            raise ValueError(f"unknown view {view!r}")
        levels = component_level_plans(seed)[0] if probes else None
        self.runner = TrialRunner(
            difficulty=difficulty,
            scenario_seed=scenario_seed,
            model=model,
            seed=seed,
            params=params,
            probe_levels=levels,
            respondent=None,
            snapshots=True,
            config=config,
        )
        self.sim = self.runner.sim
        self.view = view
        self.speed = speed
        self.host = host
        self.port = port
        self.bound_port: int | None = None
        self.probe_timeout_s = probe_timeout_s
        self.out_path = Path(out_path) if out_path else None
        self.session_id = f"session-{model.value}-{difficulty}-{seed}"
        self.paused = False
        self.finished = asyncio.Event()

        self._client = None
        self._client_refs: dict[int, str] = {}       # engine cmd id -> client ref
        self._next_cmd_id = 1
        self._out_seq = 0
        self._outbox: list[wire.WireMessage] = []
        self._probe_deadlines: dict[int, float] = {}  # probe id -> sim deadline
        self.sim.observers.append(self._on_record)

    # ------------------------------------------------------------------
    # Record-to-wire translation
    # ------------------------------------------------------------------

    def _queue(self, type_: str, payload: dict) -> None:
        self._out_seq += 1
        self._outbox.append(
            wire.WireMessage(type=type_, session=self.session_id, seq=self._out_seq, payload=payload)
        )

    def _on_record(self, record: ev.EventRecord) -> None:
        kind = record.kind
        if kind == ev.COMMAND_VERDICT:
            payload = dict(record.payload)
            payload["t"] = record.t
            payload["client_ref"] = self._client_refs.pop(int(record.payload["cmd"] or 0), "")
            self._queue("command_ack", payload)
        elif kind == ev.SYSTEM_MESSAGE:
            self._queue("system_message", {**record.payload, "t": record.t})
        elif kind in (ev.QUORUM_REACHED, ev.EXECUTION_STARTED, ev.MERGE_RESOLVED, ev.DECISION_COMPLETED, ev.HUB_ARRIVED):
            self._queue("decision_event", {"event": kind, **record.payload, "t": record.t})
        elif kind == ev.PROBE_ASKED and record.payload.get("status") == "asked":
            probe_id = int(record.payload["probe"])
            self._probe_deadlines[probe_id] = record.t + self.probe_timeout_s
            self._queue(
                "probe_question",
                {
                    "probe": record.payload["probe"],
                    "level": record.payload["level"],
                    "text": record.payload["text"],
                    "interest": record.payload["interest"],
                    "answer_kind": record.payload["truth_kind"],
                    "timeout_s": self.probe_timeout_s,
                    "t": record.t,
                },
            )
        elif kind == ev.PROBE_ANSWERED:
            self._probe_deadlines.pop(int(record.payload["probe"]), None)
        elif kind == ev.TRIAL_ENDED:
            self._queue("trial_ended", {**record.payload, "t": record.t})

    # ------------------------------------------------------------------
    # Snapshots
    # ------------------------------------------------------------------

    def build_snapshot(self) -> dict:
        sim = self.sim
        collectives = []
        for coll in sim.collectives:
            hx, hy = coll.hub_position_at(sim.tick)
            collectives.append(
                {
                    "id": coll.roman,
                    "hub": [round(hx, 1), round(hy, 1)],
                    "phase": coll.phase.value,
                    "counts": dict(coll.counts),
                    "support": {str(t): sim.reported_support(coll.index, t) for t in sorted(coll.favor) if t not in coll.ignored},
                    "committed": coll.committed_target,
                    "executing": coll.exec_target,
                    "ignored": sorted(coll.ignored),
                    "decisions": coll.decisions_made,
                }
            )
        targets = []
        for t in sorted(sim.targets.values(), key=lambda t: t.id):
            if not t.visible:
                continue
            entry = {"id": t.id, "x": round(t.x, 1), "y": round(t.y, 1), "assessed": t.assessed}
            if t.assessed:
                entry["value"] = t.value
            targets.append(entry)
        assignments = [
            {
                "kind": a.command.kind.value,
                "coll": a.command.collective_id,
                "target": a.command.target_id,
                "status": a.status,
                "acks": a.ack_count,
            }
            for a in sim.processor.assignments
        ]
        payload = {
            "t": round(sim.t, 3),
            "tick": sim.tick,
            "paused": self.paused,
            "collectives": collectives,
            "targets": targets,
            "assignments": assignments,
            "decisions_total": sum(c.decisions_made for c in sim.collectives),
        }
        if self.view == "ia":
            payload["agents"] = [
                [round(x, 1), round(y, 1), agent.state.value]
                for agent in sim.agents
                for x, y in [agent.position_at(sim.tick)]
            ]
        return payload

    # ------------------------------------------------------------------
    # Server plumbing
    # ------------------------------------------------------------------

    async def run(self) -> None:
        async with websockets.serve(self._handler, self.host, self.port) as server:
            self.bound_port = server.sockets[0].getsockname()[1]
            try:
                await self._pace()
            finally:
                self.finished.set()
        if self.out_path is not None:
            self.sim.log.save(self.out_path)

    async def _pace(self) -> None:
        wall = time.monotonic()
        interval = 1.0 / SNAPSHOT_HZ
        while not self.sim.ended:
            await asyncio.sleep(interval)
            now = time.monotonic()
            elapsed = now - wall
            wall = now
            if not self.paused:
                advance = self.speed * elapsed
                target = self.sim.tick + max(1, round(advance / self.sim.dt))
                self.runner.advance_to(min(target, self.runner.hard_stop_tick))
                self._expire_probes()
            await self._flush(snapshot=True)
        await self._flush(snapshot=True)

    def _expire_probes(self) -> None:
        due = [pid for pid, deadline in self._probe_deadlines.items() if self.sim.t >= deadline]
        for pid in due:
            self._probe_deadlines.pop(pid, None)
            self.runner.timeout_probe(pid)

    async def _flush(self, snapshot: bool = False) -> None:
        if snapshot:
            self._queue("snapshot", self.build_snapshot())
        outbox, self._outbox = self._outbox, []
        if self._client is None:
            return
        try:
            for msg in outbox:
                await self._client.send(wire.encode(msg))
        except websockets.ConnectionClosed:
            self._client = None

    async def _handler(self, websocket) -> None:
        if self._client is not None:
            await websocket.send(
                wire.encode(
                    wire.WireMessage(
                        type="error",
                        session=self.session_id,
                        payload={"reason": "session already has an operator"},
                    )
                )
            )
            await websocket.close()
            return
        self._client = websocket
        decoder = wire.FrameDecoder()
        try:
            async for raw in websocket:
                data = raw if isinstance(raw, (bytes, bytearray)) else raw.encode("utf-8")
                try:
                    messages = decoder.feed(data)
                except wire.FrameError as exc:
                    await self._violate(websocket, f"bad frame: {exc}")
                    return
                for msg in messages:
                    try:
                        await self._dispatch(msg)
                    except ProtocolViolation as exc:
                        await self._violate(websocket, str(exc))
                        return
        except websockets.ConnectionClosed:
            pass
        finally:
            if self._client is websocket:
                self._client = None

    async def _violate(self, websocket, reason: str) -> None:
        try:
            await websocket.send(
                wire.encode(
                    wire.WireMessage(type="error", session=self.session_id, payload={"reason": reason})
                )
            )
            await websocket.close()
        except websockets.ConnectionClosed:
            pass
        if self._client is websocket:
            self._client = None

    async def _dispatch(self, msg: wire.WireMessage) -> None:
        if msg.type == "join":
            self._queue(
                "hello",
                {
                    "session": self.session_id,
                    "view": self.view,
                    "model": self.sim.model.value,
                    "difficulty": self.config.difficulty,
                    "world": [self.config.world_w, self.config.world_h],
                    "hubs": [[round(x, 1), round(y, 1)] for x, y in self.config.hubs],
                    "collectives": list(ROMAN_IDS),
                    "dt": self.sim.dt,
                    "speed": self.speed,
                    "duration_limit_s": self.config.duration_limit_s,
                },
            )
            await self._flush(snapshot=True)
        elif msg.type == "command":
            p = msg.payload
            try:
                kind = CommandKind(p["kind"])
                cmd = Command(
                    kind=kind,
                    collective_id=str(p["collective"]),
                    target_id=int(p["target"]),
                    issued_at=self.sim.t,
                    cmd_id=self._next_cmd_id,
                )
            except (KeyError, ValueError) as exc:
                raise ProtocolViolation(f"malformed command payload: {exc}") from exc
            self._client_refs[self._next_cmd_id] = str(p.get("client_ref", ""))
            self._next_cmd_id += 1
            self.sim.enqueue_command(cmd)
        elif msg.type == "probe_answer":
            p = msg.payload
            try:
                probe_id = int(p["probe"])
                text = str(p["response"])
            except (KeyError, ValueError) as exc:
                raise ProtocolViolation(f"malformed probe answer: {exc}") from exc
            self.runner.answer_live(probe_id, text)
        elif msg.type == "info_window_toggle":
            p = msg.payload
            try:
                self.runner.log_window_toggle(
                    str(p["entity_kind"]),
                    str(p["entity"]),
                    str(p["action"]),
                    float(p.get("x", 0.0)),
                    float(p.get("y", 0.0)),
                )
            except KeyError as exc:
                raise ProtocolViolation(f"malformed window toggle: {exc}") from exc
        elif msg.type == "pause":
            self.paused = bool(msg.payload.get("paused", not self.paused))
            self._queue("system_message", {"category": "info", "topic": "pause", "msg": f"paused={int(self.paused)}"})
        else:
            raise ProtocolViolation(f"unknown message type {msg.type!r}")

    @property
    def config(self):
        return self.runner.config


class ProtocolViolation(Exception):
    pass


def serve_session(**kwargs) -> SessionGateway:
    """Create a gateway; `asyncio.run(gw.run())` starts it."""
    return SessionGateway(**kwargs)
