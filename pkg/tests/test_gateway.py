import asyncio
import time

import pytest
import websockets

from hubswarm import wire
from hubswarm.core import ModelKind
from hubswarm.gateway import SessionGateway
from hubswarm.scenario import generate_component
from hubswarm.trial import replay_log


def short_config(difficulty="easy", seed=5, duration=80.0):
    cfg = generate_component(difficulty, seed)
    cfg.duration_limit_s = duration
    cfg.soft_cap = 0  # end at the duration limit regardless of decisions
    return cfg


class Client:
    def __init__(self, ws):
        self.ws = ws
        self.decoder = wire.FrameDecoder()
        self.inbox = []

    async def send(self, type_, **payload):
        await self.ws.send(wire.encode(wire.WireMessage(type=type_, payload=payload)))

    async def pump(self, timeout=2.0):
        try:
            raw = await asyncio.wait_for(self.ws.recv(), timeout=timeout)
        except (asyncio.TimeoutError, websockets.ConnectionClosed):
            return []
        fresh = self.decoder.feed(raw if isinstance(raw, (bytes, bytearray)) else raw.encode())
        self.inbox.extend(fresh)
        return fresh

    async def wait_for(self, type_, timeout=10.0):
        deadline = time.monotonic() + timeout
        while time.monotonic() < deadline:
            for msg in self.inbox:
                if msg.type == type_:
                    self.inbox.remove(msg)
                    return msg
            await self.pump(timeout=min(1.0, deadline - time.monotonic()))
        raise AssertionError(f"no {type_!r} message within {timeout}s")


async def start_gateway(**kwargs):
    kwargs.setdefault("config", short_config())
    kwargs.setdefault("model", ModelKind.M2)
    kwargs.setdefault("speed", 40.0)
    kwargs.setdefault("port", 0)
    gw = SessionGateway(difficulty=kwargs["config"].difficulty, scenario_seed=kwargs["config"].seed, seed=5, **kwargs)
    task = asyncio.create_task(gw.run())
    while gw.bound_port is None and not task.done():
        await asyncio.sleep(0.01)
    assert gw.bound_port is not None, "gateway failed to bind"
    return gw, task


def test_join_hello_and_snapshot_cadence():
    async def scenario():
        gw, task = await start_gateway()
        async with websockets.connect(f"ws://127.0.0.1:{gw.bound_port}") as ws:
            client = Client(ws)
            await client.send("join")
            hello = await client.wait_for("hello")
            assert hello.payload["view"] == "ia"
            assert len(hello.payload["hubs"]) == 4
            t0 = time.monotonic()
            snaps = 0
            while snaps < 8:
                for m in await client.pump():
                    if m.type == "snapshot":
                        snaps += 1
            elapsed = time.monotonic() - t0
            # 10 Hz wall cadence: 8 snapshots should take roughly a second.
            assert elapsed < 3.0
        task.cancel()
        try:
            await task
        except asyncio.CancelledError:
            pass
    asyncio.run(scenario())


def test_ia_view_streams_agents_collective_view_does_not():
    async def scenario():
        for view, expect_agents in (("ia", True), ("collective", False)):
            gw, task = await start_gateway(view=view)
            async with websockets.connect(f"ws://127.0.0.1:{gw.bound_port}") as ws:
                client = Client(ws)
                await client.send("join")
                await client.wait_for("hello")
                snap = await client.wait_for("snapshot")
                assert ("agents" in snap.payload) == expect_agents
                if expect_agents:
                    assert len(snap.payload["agents"]) == 800
            task.cancel()
            try:
                await task
            except asyncio.CancelledError:
                pass
    asyncio.run(scenario())


def test_command_roundtrip_and_illegal_ack():
    async def scenario():
        gw, task = await start_gateway()
        async with websockets.connect(f"ws://127.0.0.1:{gw.bound_port}") as ws:
            client = Client(ws)
            await client.send("join")
            await client.wait_for("hello")
            # Wait until some target is discovered, then fire a decide with
            # zero support: must come back illegal with a system message.
            target = None
            deadline = time.monotonic() + 15
            while target is None and time.monotonic() < deadline:
                snap = await client.wait_for("snapshot")
                support = snap.payload["collectives"][0]["support"]
                if snap.payload["targets"]:
                    in_any = [t["id"] for t in snap.payload["targets"]]
                    target = in_any[0]
            assert target is not None
            t_send = time.monotonic()
            await client.send("command", kind="decide", collective="I", target=target, client_ref="ref-1")
            ack = await client.wait_for("command_ack")
            latency = time.monotonic() - t_send
            assert ack.payload["client_ref"] == "ref-1"
            assert ack.payload["verdict"] in ("illegal", "error")
            if ack.payload["verdict"] == "illegal":
                msg = await client.wait_for("system_message")
                assert msg.payload.get("category") == "illegal"
            assert latency < 2.0, f"ack took {latency:.2f}s"
        task.cancel()
        try:
            await task
        except asyncio.CancelledError:
            pass
    asyncio.run(scenario())


def test_probe_flow_and_window_toggles_reach_log():
    async def scenario():
        gw, task = await start_gateway(speed=60.0)
        async with websockets.connect(f"ws://127.0.0.1:{gw.bound_port}") as ws:
            client = Client(ws)
            await client.send("join")
            await client.wait_for("hello")
            question = await client.wait_for("probe_question", timeout=20)
            kind = question.payload["answer_kind"]
            response = {"set": "I", "bool": "no", "choice": "none"}[kind]
            await client.send("probe_answer", probe=question.payload["probe"], response=response)
            await client.send(
                "info_window_toggle", entity_kind="target", entity="3", action="open", x=10, y=20
            )
            # Give the server a beat to log both.
            for _ in range(10):
                await client.pump(timeout=0.5)
                answered = [r for r in gw.sim.log.records if r.kind == "ProbeAnswered"]
                toggles = [
                    r for r in gw.sim.log.records
                    if r.kind == "SystemMessage" and r.payload.get("topic") == "window_toggle"
                ]
                if answered and toggles:
                    break
            assert answered and answered[0].payload["source"] == "client"
            assert toggles and toggles[0].payload["action"] == "open"
        task.cancel()
        try:
            await task
        except asyncio.CancelledError:
            pass
    asyncio.run(scenario())


def test_protocol_violation_closes_client_but_trial_finishes():
    async def scenario():
        cfg = short_config(duration=30.0)
        gw, task = await start_gateway(config=cfg, speed=60.0, probes=False)
        async with websockets.connect(f"ws://127.0.0.1:{gw.bound_port}") as ws:
            client = Client(ws)
            await client.send("join")
            await client.wait_for("hello")
            await client.send("make_me_a_sandwich")
            err = await client.wait_for("error")
            assert "unknown message type" in err.payload["reason"]
            with pytest.raises(websockets.ConnectionClosed):
                while True:
                    await asyncio.wait_for(ws.recv(), timeout=5)
        # The simulation must still run to a clean trial end.
        await asyncio.wait_for(task, timeout=30)
        assert gw.sim.ended
        assert gw.sim.log.records[-1].kind == "TrialEnded"
    asyncio.run(scenario())


def test_session_log_replays_cleanly(tmp_path):
    async def scenario():
        out = tmp_path / "session.hclog"
        cfg = short_config(duration=60.0)
        gw, task = await start_gateway(config=cfg, speed=60.0, out_path=out)
        async with websockets.connect(f"ws://127.0.0.1:{gw.bound_port}") as ws:
            client = Client(ws)
            await client.send("join")
            await client.wait_for("hello")
            sent = False
            while not task.done():
                for m in await client.pump(timeout=1.0):
                    if m.type == "snapshot" and not sent:
                        support = m.payload["collectives"][0]["support"]
                        if support:
                            best = max(support, key=lambda k: support[k])
                            await client.send(
                                "command", kind="investigate", collective="I",
                                target=int(best), client_ref="x",
                            )
                            sent = True
                    if m.type == "probe_question":
                        resp = {"set": "none", "bool": "no", "choice": "none"}[m.payload["answer_kind"]]
                        await client.send("probe_answer", probe=m.payload["probe"], response=resp)
                if task.done():
                    break
        await asyncio.wait_for(task, timeout=60)
        return out
    out = asyncio.run(scenario())
    from hubswarm.events import EventLog
    report = replay_log(EventLog.load(out))
    assert report.clean, f"session replay diverged at {report.first_divergent_seq}"


def test_pause_halts_sim_clock_but_keeps_snapshots():
    async def scenario():
        gw, task = await start_gateway(speed=40.0, probes=False)
        async with websockets.connect(f"ws://127.0.0.1:{gw.bound_port}") as ws:
            client = Client(ws)
            await client.send("join")
            await client.wait_for("hello")
            await client.send("pause", paused=True)
            await client.wait_for("system_message")
            t_frozen = gw.sim.t
            snaps = 0
            for _ in range(6):
                for m in await client.pump():
                    if m.type == "snapshot":
                        snaps += 1
                        assert m.payload["paused"] is True
            assert gw.sim.t == t_frozen, "paused sessions must not advance the sim clock"
            assert snaps >= 2, "snapshots keep flowing while paused"
            await client.send("pause", paused=False)
            for _ in range(20):
                await client.pump(timeout=0.3)
                if gw.sim.t > t_frozen:
                    break
            assert gw.sim.t > t_frozen
        task.cancel()
        try:
            await task
        except asyncio.CancelledError:
            pass
    asyncio.run(scenario())
