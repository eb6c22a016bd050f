"""Deterministic tick-driven engine for collective decision dynamics.

The engine advances on a fixed tick clock (default 0.1 s) but is internally
event-driven: agent flights, target sensing, hub interactions, and hub
relocations are scheduled on a heap and processed in (tick, insertion)
order, so ticks without activity cost nothing. All randomness flows through
per-collective `random.Random` streams derived from the master seed, which
makes runs bit-reproducible for identical (config, model, seed, command
stream) inputs.

Agent lifecycle: uncommitted agents fly hub -> waypoint -> hub and can start
favoring a target they sense en route. Favoring agents shuttle between hub
and target, reassess the target's value on every visit, recruit uncommitted
peers inside the hub (only after completing their first round trip, which
realizes the distance-proportional interaction delay), and may be
cross-inhibited by advocates of competing targets. Once 30% of a collective
favors one target the collective commits; committed agents convert peers
they meet inside the hub. At 50% support the collective executes the move.
"""

from __future__ import annotations

import hashlib
import heapq
import math
import random
from dataclasses import dataclass, field
from typing import Callable

from . import events as ev
from .commands import Command, CommandProcessor, INVESTIGATE_CONVERSIONS
from .core import (
    COLLECTIVE_SIZE,
    N_COLLECTIVES,
    ROMAN_IDS,
    SEARCH_RADIUS_M,
    Agent,
    AgentState,
    ConfigurationError,
    DynamicsParams,
    EntityLookupError,
    ModelKind,
    Phase,
    ProtocolError,
    SimulationError,
    SupportSnapshot,
    Target,
    detect_quorum,
    dist,
    execute_threshold,
    quorum_threshold,
    segment_point_distance,
)
from .scenario import EmptyRangeError, TrialComponentConfig, ground_truth_best

# Heap event codes.
_EV_ARRIVE = 0
_EV_SENSE = 1
_EV_HUB = 2      # landing marker for a hub arrival; resolved in roman-id order

_U = AgentState.UNCOMMITTED
_F = AgentState.FAVORING
_C = AgentState.COMMITTED
_X = AgentState.EXECUTING


@dataclass
class Collective:
    """Runtime state of one hub and its 200 agents."""

    index: int
    hub_x: float
    hub_y: float
    prev_hub_x: float
    prev_hub_y: float
    rng: random.Random
    agents: list[Agent] = field(default_factory=list)
    phase: Phase = Phase.DELIBERATING
    committed_target: int | None = None
    exec_target: int | None = None
    decisions_made: int = 0
    ignored: set[int] = field(default_factory=set)
    counts: dict[str, int] = field(default_factory=lambda: {"U": COLLECTIVE_SIZE, "F": 0, "C": 0, "X": 0})
    favor: dict[int, int] = field(default_factory=dict)      # physical favoring by target
    adv: dict[int, int] = field(default_factory=dict)        # advocating favoring by target
    window_start: int = 0                                    # tick opening the current decision window
    hub_eta: int | None = None
    hub_leg: tuple[float, float, float, float, int, int] | None = None
    pending: dict | None = None                              # decision info captured at execution start
    decision_quota: int = 2
    dirty: bool = False
    sense_targets: list[int] = field(default_factory=list)   # ids inside the search region

    @property
    def roman(self) -> str:
        return ROMAN_IDS[self.index]

    @property
    def done(self) -> bool:
        return self.decisions_made >= self.decision_quota

    def hub_position_at(self, tick: int) -> tuple[float, float]:
        if self.hub_leg is None:
            return (self.hub_x, self.hub_y)
        x0, y0, x1, y1, t0, t1 = self.hub_leg
        if tick >= t1 or t1 <= t0:
            return (x1, y1)
        if tick <= t0:
            return (x0, y0)
        frac = (tick - t0) / (t1 - t0)
        return (x0 + (x1 - x0) * frac, y0 + (y1 - y0) * frac)


class Simulation:
    """Full world state plus the discrete-event machinery that advances it."""

    def __init__(
        self,
        config: TrialComponentConfig,
        model: ModelKind,
        seed: int,
        params: DynamicsParams | None = None,
        snapshots: bool = True,
    ):
        config.validate()
        self.config = config
        self.model = model
        self.seed = seed
        self.params = params or DynamicsParams()
        self.params.validate()
        self.snapshots_enabled = snapshots

        self.dt = self.params.dt
        self.per_sec = max(1, round(1.0 / self.dt))
        self.tick = 0
        self.ended = False
        self.end_reason: str | None = None

        self.targets: dict[int, Target] = {
            t.id: Target(id=t.id, x=t.x, y=t.y, value=t.value) for t in config.targets
        }
        self.collectives: list[Collective] = []
        self.agents: list[Agent] = []
        for ci, (hx, hy) in enumerate(config.hubs):
            coll = Collective(
                index=ci,
                hub_x=hx,
                hub_y=hy,
                prev_hub_x=hx,
                prev_hub_y=hy,
                rng=random.Random(f"sim:{seed}:coll:{ci}"),
                decision_quota=max(1, config.decision_cap // N_COLLECTIVES),
            )
            for k in range(COLLECTIVE_SIZE):
                gid = ci * COLLECTIVE_SIZE + k
                agent = Agent(id=gid, collective=ci, x=hx, y=hy)
                agent.leg_x0 = agent.leg_x1 = hx
                agent.leg_y0 = agent.leg_y1 = hy
                coll.agents.append(agent)
                self.agents.append(agent)
            self._refresh_sense_targets(coll)
            self.collectives.append(coll)

        self._heap: list[tuple[int, int, int, int, int]] = []
        self._heap_seq = 0
        self._seq = 0
        self.log = ev.EventLog()
        self.observers: list[Callable[[ev.EventRecord], None]] = []
        self._last_second = 0
        self._command_queue: list[tuple[int, int, Command]] = []
        self._cmd_order = 0
        self.processor = CommandProcessor(self)
        self.support_history: list[tuple[int, dict[int, int]]] = []

        # Initial departures: the whole population starts uncommitted at its
        # hub with a staggered dwell so flights desynchronize.
        for coll in self.collectives:
            for agent in coll.agents:
                self._schedule_arrive(agent, self._dwell_ticks(coll.rng))

    # ------------------------------------------------------------------
    # Event emission
    # ------------------------------------------------------------------

    @property
    def t(self) -> float:
        return self.tick * self.dt

    def emit(self, kind: str, payload: dict[str, str]) -> ev.EventRecord:
        record = ev.EventRecord(seq=self._seq, t=self.tick * self.dt, kind=kind, payload=payload)
        self._seq += 1
        self.log.append(record)
        for obs in self.observers:
            obs(record)
        return record

    # ------------------------------------------------------------------
    # Scheduling helpers
    # ------------------------------------------------------------------

    def _push(self, tick: int, code: int, a: int, b: int) -> None:
        self._heap_seq += 1
        heapq.heappush(self._heap, (max(tick, self.tick + 1), self._heap_seq, code, a, b))

    def _travel_ticks(self, d: float) -> int:
        return max(1, math.ceil(d / (self.params.agent_speed * self.dt)))

    def _dwell_ticks(self, rng: random.Random) -> int:
        base = max(1, round(self.params.hub_dwell_s / self.dt))
        return base + rng.randrange(0, max(1, self.per_sec * 3))

    def _set_leg(self, agent: Agent, x1: float, y1: float, activity: str) -> None:
        x0, y0 = agent.position_at(self.tick)
        d = dist(x0, y0, x1, y1)
        agent.leg_x0, agent.leg_y0 = x0, y0
        agent.leg_x1, agent.leg_y1 = x1, y1
        agent.leg_t0 = self.tick
        agent.leg_t1 = self.tick + (self._travel_ticks(d) if d > 0 else 1)
        agent.leg_token += 1
        agent.activity = activity
        agent.at_hub = False
        self._push(agent.leg_t1, _EV_ARRIVE, agent.id, agent.leg_token)

    def _park(self, agent: Agent, x: float, y: float, activity: str = "parked") -> None:
        agent.x, agent.y = x, y
        agent.leg_x0 = agent.leg_x1 = x
        agent.leg_y0 = agent.leg_y1 = y
        agent.leg_t0 = agent.leg_t1 = self.tick
        agent.leg_token += 1
        agent.activity = activity

    def _schedule_arrive(self, agent: Agent, delay_ticks: int) -> None:
        """Queue a wake-up for an agent idling inside the hub."""
        agent.leg_token += 1
        agent.activity = "idle"
        agent.at_hub = True
        self._push(self.tick + delay_ticks, _EV_ARRIVE, agent.id, agent.leg_token)

    def _schedule_sensing(self, agent: Agent, coll: Collective) -> None:
        """Schedule first-crossing sense events along the agent's new leg."""
        sensing = self.params.sensing_radius
        x0, y0, x1, y1 = agent.leg_x0, agent.leg_y0, agent.leg_x1, agent.leg_y1
        length = dist(x0, y0, x1, y1)
        if length <= 0:
            return
        leg_ticks = agent.leg_t1 - agent.leg_t0
        for tid in coll.sense_targets:
            target = self.targets[tid]
            if target.occupied_by is not None:
                continue
            d_min, s_star = segment_point_distance(x0, y0, x1, y1, target.x, target.y)
            if d_min >= sensing:
                continue
            half = math.sqrt(sensing * sensing - d_min * d_min) / length
            s_enter = max(0.0, s_star - half)
            tick = agent.leg_t0 + max(1, math.ceil(s_enter * leg_ticks))
            if tick <= agent.leg_t1:
                self._push(tick, _EV_SENSE, agent.id, (agent.leg_token << 5) | tid)

    def _refresh_sense_targets(self, coll: Collective) -> None:
        coll.sense_targets = [
            t.id
            for t in self.targets.values()
            if t.occupied_by is None and dist(t.x, t.y, coll.hub_x, coll.hub_y) <= SEARCH_RADIUS_M
        ]

    # ------------------------------------------------------------------
    # Support bookkeeping
    # ------------------------------------------------------------------

    def _set_state(
        self,
        agent: Agent,
        new_state: AgentState,
        target: int | None,
        reason: str,
        log: bool = True,
    ) -> None:
        coll = self.collectives[agent.collective]
        old_state = agent.state
        old_target = agent.favored_target
        coll.counts[old_state.value] -= 1
        if old_state is _F and old_target is not None:
            coll.favor[old_target] -= 1
            if coll.favor[old_target] == 0:
                del coll.favor[old_target]
            if agent.advocating:
                coll.adv[old_target] -= 1
                if coll.adv[old_target] == 0:
                    del coll.adv[old_target]
        agent.advocating = False
        agent.state = new_state
        agent.favored_target = target if new_state in (_F, _C, _X) else None
        coll.counts[new_state.value] += 1
        if new_state is _F and target is not None:
            coll.favor[target] = coll.favor.get(target, 0) + 1
        coll.dirty = True
        if agent.msg_queue:
            agent.msg_queue.clear()
        if log:
            self.emit(
                ev.STATE_TRANSITION,
                {
                    "coll": coll.roman,
                    "agent": str(agent.id),
                    "frm": old_state.value,
                    "frm_target": "" if old_target is None else str(old_target),
                    "to": new_state.value,
                    "target": "" if target is None else str(target),
                    "reason": reason,
                },
            )

    def reported_support(self, ci: int, target_id: int) -> int:
        """Operator-facing support: favoring plus committed, 0 for ignored targets."""
        coll = self.collectives[ci]
        if target_id in coll.ignored:
            return 0
        n = coll.favor.get(target_id, 0)
        if coll.committed_target == target_id:
            n += coll.counts["C"]
        return n

    def reported_favoring(self, coll: Collective) -> dict[int, int]:
        return {t: n for t, n in coll.favor.items() if t not in coll.ignored}

    def support_snapshot(self, ci: int) -> SupportSnapshot:
        if not 0 <= ci < len(self.collectives):
            raise EntityLookupError(f"unknown collective index {ci}")
        coll = self.collectives[ci]
        snap = SupportSnapshot(
            collective_id=coll.roman,
            t=self.t,
            counts=dict(coll.counts),
            favoring=dict(coll.favor),
            committed_target=coll.committed_target,
            ignored=frozenset(coll.ignored),
        )
        snap.verify(COLLECTIVE_SIZE)
        return snap

    # ------------------------------------------------------------------
    # Main loop
    # ------------------------------------------------------------------

    def enqueue_command(self, cmd: Command, apply_tick: int | None = None) -> int:
        """Queue an operator command for the next tick boundary after issue.

        Returns the tick at which the command will apply; it is logged so a
        replay can re-inject the command at exactly the same boundary.
        """
        if apply_tick is None:
            apply_tick = int(math.floor(cmd.issued_at / self.dt)) + 1
        apply_tick = max(self.tick + 1, apply_tick)
        self._cmd_order += 1
        heapq.heappush(self._command_queue, (apply_tick, self._cmd_order, cmd))
        return apply_tick

    def step(self, n_ticks: int = 1) -> list[ev.EventRecord]:
        """Advance the clock; returns the records emitted along the way."""
        start = len(self.log.records)
        self.run_to_tick(self.tick + max(1, n_ticks))
        return self.log.records[start:]

    def run_to_tick(self, target_tick: int) -> None:
        while self.tick < target_tick and not self.ended:
            next_tick = target_tick
            if self._heap and self._heap[0][0] < next_tick:
                next_tick = self._heap[0][0]
            if self._command_queue and self._command_queue[0][0] < next_tick:
                next_tick = self._command_queue[0][0]
            next_second = (self._last_second + 1) * self.per_sec
            if next_second < next_tick:
                next_tick = next_second
            self.tick = next_tick

            if self.tick >= (self._last_second + 1) * self.per_sec:
                self._last_second = self.tick // self.per_sec
                self._second_duties()
                if self.ended:
                    return

            while self._command_queue and self._command_queue[0][0] <= self.tick:
                _, _, cmd = heapq.heappop(self._command_queue)
                self.apply_command(cmd)
                if self.ended:
                    return

            while self._heap and self._heap[0][0] <= self.tick:
                _, _, code, a, b = heapq.heappop(self._heap)
                if code == _EV_ARRIVE:
                    self._on_arrive(a, b)
                elif code == _EV_SENSE:
                    self._on_sense(a, b >> 5, b & 31)
                # _EV_HUB entries only force the loop to land on the tick.

            self._end_tick_checks()

    def run_to_time(self, seconds: float) -> None:
        self.run_to_tick(int(round(seconds / self.dt)))

    def _second_duties(self) -> None:
        second = self.tick // self.per_sec
        totals: dict[int, int] = {}
        for coll in self.collectives:
            seen = set(coll.favor)
            if coll.committed_target is not None:
                seen.add(coll.committed_target)
            for tid in seen:
                s = self.reported_support(coll.index, tid)
                if s:
                    totals[tid] = totals.get(tid, 0) + s
        self.support_history.append((second, totals))
        if len(self.support_history) > 40:
            del self.support_history[0]
        if self.snapshots_enabled:
            for coll in self.collectives:
                support = ",".join(
                    f"{tid}:{n}" for tid, n in sorted(self.reported_favoring(coll).items())
                )
                hx, hy = coll.hub_position_at(self.tick)
                self.emit(
                    ev.TICK_SNAPSHOT,
                    {
                        "coll": coll.roman,
                        "U": str(coll.counts["U"]),
                        "F": str(coll.counts["F"]),
                        "C": str(coll.counts["C"]),
                        "X": str(coll.counts["X"]),
                        "phase": coll.phase.value,
                        "support": support,
                        "hub": f"{hx:.1f},{hy:.1f}",
                    },
                )
        self._check_termination()

    # ------------------------------------------------------------------
    # Heap event handlers
    # ------------------------------------------------------------------

    def _on_arrive(self, gid: int, token: int) -> None:
        agent = self.agents[gid]
        if agent.leg_token != token or agent.lost:
            return
        coll = self.collectives[agent.collective]
        agent.x, agent.y = agent.leg_x1, agent.leg_y1

        if agent.activity == "idle":
            self._depart(agent, coll)
        elif agent.activity == "exec":
            self._park(agent, agent.x, agent.y, "exec_done")
        elif agent.activity == "to_target":
            self._at_target(agent, coll)
        elif agent.activity == "explore_out":
            self._set_leg(agent, coll.hub_x, coll.hub_y, "explore_back")
            self._schedule_sensing(agent, coll)
        else:  # explore_back / from_target
            self._hub_entry(agent, coll)

    def _depart(self, agent: Agent, coll: Collective) -> None:
        """Dwell finished: leave the hub according to the current state."""
        if coll.phase is Phase.IDLE or agent.lost:
            return
        if agent.state is _U:
            r = SEARCH_RADIUS_M * math.sqrt(coll.rng.random())
            theta = 2.0 * math.pi * coll.rng.random()
            self._set_leg(
                agent,
                coll.hub_x + r * math.cos(theta),
                coll.hub_y + r * math.sin(theta),
                "explore_out",
            )
            self._schedule_sensing(agent, coll)
        elif agent.state is _F:
            target = self.targets[agent.favored_target]
            self._set_leg(agent, target.x, target.y, "to_target")
        elif agent.state is _X and coll.exec_target is not None:
            target = self.targets[coll.exec_target]
            self._set_leg(agent, target.x, target.y, "exec")
        # Committed agents wait inside the hub until execution begins.

    def _on_sense(self, gid: int, token: int, tid: int) -> None:
        agent = self.agents[gid]
        if agent.leg_token != token or agent.state is not _U or agent.lost:
            return
        target = self.targets[tid]
        if target.occupied_by is not None:
            return
        coll = self.collectives[agent.collective]
        if not target.discovered:
            target.discovered = True
            self.emit(
                ev.TARGET_DISCOVERED,
                {"target": str(tid), "coll": coll.roman, "agent": str(agent.id)},
            )
        if tid in coll.ignored:
            return
        if coll.rng.random() < self.params.discovery_rate * self.params.value_weight(target.value):
            self._set_state(agent, _F, tid, "sense")
            self._set_leg(agent, target.x, target.y, "to_target")

    def _at_target(self, agent: Agent, coll: Collective) -> None:
        """Favoring agent reached its target: evaluate, maybe abandon, head home."""
        tid = agent.favored_target
        target = self.targets.get(tid) if tid is not None else None
        if agent.state is not _F or target is None or target.occupied_by is not None:
            self._set_leg(agent, coll.hub_x, coll.hub_y, "from_target")
            return
        target.evaluations += 1
        noise = self.params.assessment_noise
        agent.assessed_value = target.value + (coll.rng.gauss(0.0, noise) if noise > 0 else 0.0)
        if target.evaluations == 2:
            self.emit(
                ev.TARGET_ASSESSED,
                {
                    "target": str(tid),
                    "value": str(target.value),
                    "coll": coll.roman,
                    "agent": str(agent.id),
                },
            )
        if coll.rng.random() < self.params.abandon_rate * (1.0 - self.params.value_weight(target.value)):
            self._set_state(agent, _U, None, "abandon")
            self._set_leg(agent, coll.hub_x, coll.hub_y, "explore_back")
            self._schedule_sensing(agent, coll)
            return
        self._set_leg(agent, coll.hub_x, coll.hub_y, "from_target")

    # ------------------------------------------------------------------
    # Hub interactions
    # ------------------------------------------------------------------

    def _hub_entry(self, agent: Agent, coll: Collective) -> None:
        agent.at_hub = True
        agent.x, agent.y = coll.hub_x, coll.hub_y

        # Standing abandon orders are delivered the moment an agent touches
        # the hub, before any other interaction.
        if agent.state is _F and agent.favored_target in coll.ignored:
            self._set_state(agent, _U, None, "abandoned")

        if coll.phase is Phase.EXECUTING:
            if agent.state is not _X:
                self._set_state(agent, _X, coll.exec_target, "execute")
            target = self.targets[coll.exec_target]
            self._set_leg(agent, target.x, target.y, "exec")
            return
        if coll.phase in (Phase.RELOCATING, Phase.IDLE):
            self._park(agent, coll.hub_x, coll.hub_y)
            return

        k_eff = self.params.effective_interactions

        if coll.phase is Phase.COMMITTED:
            tstar = coll.committed_target
            if agent.state is _F and agent.favored_target == tstar:
                self._set_state(agent, _C, tstar, "quorum")
                self._park(agent, coll.hub_x, coll.hub_y)
                return
            c_frac = coll.counts["C"] / COLLECTIVE_SIZE
            if c_frac > 0 and coll.rng.random() < 1.0 - (1.0 - c_frac) ** k_eff:
                self._set_state(agent, _C, tstar, "convert")
                self._park(agent, coll.hub_x, coll.hub_y)
                return

        if agent.state is _U:
            self._uncommitted_hub_visit(agent, coll, k_eff)
        elif agent.state is _F:
            self._favoring_hub_visit(agent, coll, k_eff)
        self._schedule_arrive(agent, self._dwell_ticks(coll.rng))

    def _uncommitted_hub_visit(self, agent: Agent, coll: Collective, k_eff: float) -> None:
        assignment = self.processor.try_ack_investigate(coll.index)
        if assignment is not None:
            self._acknowledge_investigate(agent, coll, assignment)
            return
        if not self.model.autonomous_consensus or not coll.adv:
            return
        # Mean-field recruitment: each of the k hub interactions samples a
        # peer; advocates of target i make up adv_i of the 200 and recruit
        # in proportion to the value they assessed.
        u = coll.rng.random()
        cum = 0.0
        for tid in sorted(coll.adv):
            if tid in coll.ignored:
                continue
            target = self.targets[tid]
            if target.occupied_by is not None:
                continue
            cum += (
                self.params.recruit_rate
                * k_eff
                * (coll.adv[tid] / COLLECTIVE_SIZE)
                * self.params.value_weight(target.value)
            )
            if u < cum:
                self._set_state(agent, _F, tid, "recruit")
                return

    def _favoring_hub_visit(self, agent: Agent, coll: Collective, k_eff: float) -> None:
        tid = agent.favored_target
        if not agent.advocating:
            agent.advocating = True
            coll.adv[tid] = coll.adv.get(tid, 0) + 1
        if not self.model.autonomous_consensus:
            return
        p_inhibit = 0.0
        for other, n in coll.adv.items():
            if other == tid or other in coll.ignored:
                continue
            target = self.targets[other]
            if target.occupied_by is not None:
                continue
            p_inhibit += (
                self.params.cross_inhibition
                * k_eff
                * (n / COLLECTIVE_SIZE)
                * self.params.value_weight(target.value)
            )
        if p_inhibit > 0 and coll.rng.random() < min(1.0, p_inhibit):
            self._set_state(agent, _U, None, "inhibit")

    def _acknowledge_investigate(self, agent: Agent, coll: Collective, assignment) -> None:
        tid = assignment.command.target_id
        self._set_state(agent, _F, tid, "investigate")
        if self.processor.record_ack(assignment):
            self.emit(
                ev.SYSTEM_MESSAGE,
                {
                    "category": "info",
                    "topic": "assignment_complete",
                    "msg": f"investigate {coll.roman}->target {tid} acknowledged by "
                    f"{assignment.ack_count} entities",
                    "coll": coll.roman,
                    "target": str(tid),
                },
            )

    # ------------------------------------------------------------------
    # Command application (engine-side effects of the command protocol)
    # ------------------------------------------------------------------

    def apply_command(self, cmd: Command) -> ev.EventRecord:
        """Log, validate, and apply one operator command at this boundary."""
        self.emit(
            ev.COMMAND_ISSUED,
            {
                "cmd": str(cmd.cmd_id),
                "cmd_kind": cmd.kind.value,
                "coll": cmd.collective_id,
                "target": str(cmd.target_id),
                "issued_at": f"{cmd.issued_at:.3f}",
                "tick": str(self.tick),
            },
        )
        verdict = "legal"
        reason_text = ""
        msg = None
        try:
            reason, msg = self.processor.handle(cmd)
            if reason is not None:
                verdict = "illegal"
                reason_text = reason.value
        except SimulationError as exc:
            verdict = "error"
            reason_text = exc.args[0] if exc.args else str(exc)
        record = self.emit(
            ev.COMMAND_VERDICT,
            {
                "cmd": str(cmd.cmd_id),
                "verdict": verdict,
                "reason": reason_text,
                "cmd_kind": cmd.kind.value,
                "coll": cmd.collective_id,
                "target": str(cmd.target_id),
            },
        )
        if verdict == "illegal" and msg is not None:
            self.emit(
                ev.SYSTEM_MESSAGE,
                {"category": "illegal", "reason": reason_text, "msg": msg.text, "cmd": str(cmd.cmd_id)},
            )
        self._end_tick_checks()
        return record

    def start_investigate(self, ci: int, target_id: int, assignment) -> None:
        """Convert up to 10 uncommitted agents, starting with those in the hub."""
        coll = self.collectives[ci]
        for agent in coll.agents:
            if assignment.ack_count >= INVESTIGATE_CONVERSIONS:
                break
            if agent.state is _U and agent.at_hub and not agent.lost:
                self._acknowledge_investigate(agent, coll, assignment)
        # Remaining acknowledgments happen as uncommitted agents touch the hub.

    def apply_abandon(self, ci: int, target_id: int) -> None:
        coll = self.collectives[ci]
        if target_id in coll.ignored:
            return  # idempotent
        coll.ignored.add(target_id)
        for agent in coll.agents:
            if agent.state is _F and agent.favored_target == target_id and agent.at_hub:
                self._set_state(agent, _U, None, "abandoned")
        if coll.committed_target == target_id:
            # The operator overruled the quorum: committed agents (always
            # inside the hub) release immediately and deliberation restarts.
            for agent in coll.agents:
                if agent.state is _C:
                    self._set_state(agent, _U, None, "abandoned")
                    self._schedule_arrive(agent, self._dwell_ticks(coll.rng))
            coll.committed_target = None
            coll.phase = Phase.DELIBERATING
            self._clear_msg_queues(coll)
        coll.dirty = True

    def cancel_abandon(self, ci: int, target_id: int) -> None:
        coll = self.collectives[ci]
        coll.ignored.discard(target_id)
        coll.dirty = True

    def apply_decide(self, ci: int, target_id: int) -> None:
        self.begin_execution(ci, target_id, trigger="decide")

    # ------------------------------------------------------------------
    # Phase transitions
    # ------------------------------------------------------------------

    def _end_tick_checks(self) -> None:
        if self.ended:
            return
        # Hub arrivals resolve at the tick boundary in roman-id order, so a
        # simultaneous race always breaks toward the lower id.
        for coll in self.collectives:
            if coll.hub_eta is not None and coll.hub_eta <= self.tick:
                self._on_hub_arrive(coll)
        for coll in self.collectives:
            if not coll.dirty:
                continue
            coll.dirty = False
            if not self.model.autonomous_consensus:
                continue
            if coll.phase is Phase.DELIBERATING:
                quorum_target = detect_quorum(self.support_snapshot(coll.index), COLLECTIVE_SIZE)
                if quorum_target is not None:
                    self._reach_quorum(coll, quorum_target)
            if coll.phase is Phase.COMMITTED:
                tstar = coll.committed_target
                if self.reported_support(coll.index, tstar) >= execute_threshold(COLLECTIVE_SIZE):
                    self.begin_execution(coll.index, tstar, trigger="autonomous")
        self._check_termination()

    def _reach_quorum(self, coll: Collective, target_id: int) -> None:
        support = self.reported_support(coll.index, target_id)
        self.emit(
            ev.QUORUM_REACHED,
            {
                "coll": coll.roman,
                "target": str(target_id),
                "support": str(support),
                "threshold": str(quorum_threshold(COLLECTIVE_SIZE)),
            },
        )
        coll.phase = Phase.COMMITTED
        coll.committed_target = target_id
        self._clear_msg_queues(coll)
        for agent in coll.agents:
            if agent.state is _F and agent.favored_target == target_id and agent.at_hub and not agent.lost:
                self._set_state(agent, _C, target_id, "quorum")
                self._park(agent, coll.hub_x, coll.hub_y)

    def begin_execution(self, ci: int, target_id: int, trigger: str) -> None:
        """Move the collective toward `target_id`.

        Preconditions: the autonomous trigger requires 50% support; the
        decide trigger requires a validated legal command (30%).
        """
        coll = self.collectives[ci]
        if coll.phase not in (Phase.DELIBERATING, Phase.COMMITTED):
            raise SimulationError(f"begin_execution in phase {coll.phase.value}")
        support = self.reported_support(ci, target_id)
        if trigger == "autonomous" and support < execute_threshold(COLLECTIVE_SIZE):
            raise SimulationError(
                f"autonomous execution below threshold: {support} < {execute_threshold(COLLECTIVE_SIZE)}"
            )
        if trigger == "decide" and support < quorum_threshold(COLLECTIVE_SIZE):
            raise SimulationError(f"decide below quorum: support {support}")
        target = self.targets[target_id]
        occupied = {t.id for t in self.targets.values() if t.occupied_by is not None}
        try:
            oracle = ground_truth_best(self.config, (coll.hub_x, coll.hub_y), occupied)
        except EmptyRangeError:
            oracle = -1
        eta = self._travel_ticks(dist(coll.hub_x, coll.hub_y, target.x, target.y))
        coll.pending = {
            "target": target_id,
            "oracle": oracle,
            "success": target_id == oracle,
            "trigger": trigger,
            "exec_start_tick": self.tick,
            "window_start_tick": coll.window_start,
        }
        coll.phase = Phase.EXECUTING
        coll.exec_target = target_id
        coll.committed_target = None
        # The deliberation site is the fallback should this move lose a race.
        coll.prev_hub_x, coll.prev_hub_y = coll.hub_x, coll.hub_y
        coll.hub_leg = (coll.hub_x, coll.hub_y, target.x, target.y, self.tick, self.tick + eta)
        coll.hub_eta = self.tick + eta
        self._clear_msg_queues(coll)
        self.emit(
            ev.EXECUTION_STARTED,
            {
                "coll": coll.roman,
                "target": str(target_id),
                "support": str(support),
                "trigger": trigger,
                "oracle": str(oracle),
                "window_start": f"{coll.window_start * self.dt:.3f}",
                "eta_s": f"{eta * self.dt:.3f}",
            },
        )
        if self.params.lost_entities_enabled:
            for agent in coll.agents:
                if not agent.at_hub and not agent.lost and coll.rng.random() < self.params.lost_entity_rate:
                    agent.lost = True
                    self._set_state(agent, _U, None, "lost")
        for agent in coll.agents:
            if agent.lost:
                continue
            if agent.at_hub:
                if agent.state is not _X:
                    self._set_state(agent, _X, target_id, "execute", log=False)
                self._set_leg(agent, target.x, target.y, "exec")
            elif agent.activity == "to_target" and agent.favored_target == target_id:
                # Already flying at the selected target: finish the leg as an
                # executing entity.
                if agent.state is not _X:
                    self._set_state(agent, _X, target_id, "execute", log=False)
                agent.activity = "exec"
        self._push(coll.hub_eta, _EV_HUB, coll.index, 0)

    def _on_hub_arrive(self, coll: Collective) -> None:
        if coll.hub_eta is None or coll.hub_eta > self.tick:
            return
        hx, hy = coll.hub_position_at(self.tick)
        coll.hub_x, coll.hub_y = hx, hy
        coll.hub_eta = None
        coll.hub_leg = None
        if coll.phase is Phase.EXECUTING:
            target = self.targets[coll.exec_target]
            self.emit(
                ev.HUB_ARRIVED,
                {"coll": coll.roman, "target": str(coll.exec_target), "x": f"{hx:.1f}", "y": f"{hy:.1f}"},
            )
            if target.occupied_by is not None:
                # Lost the race in this very tick to a lower-id arrival; the
                # merge handler has already turned this collective around.
                return
            self._occupy_and_complete(coll, target)
        elif coll.phase is Phase.RELOCATING:
            self.emit(
                ev.HUB_ARRIVED,
                {"coll": coll.roman, "target": "home", "x": f"{hx:.1f}", "y": f"{hy:.1f}"},
            )
            self.complete_decision(coll.index)

    def _occupy_and_complete(self, coll: Collective, target: Target) -> None:
        target.occupied_by = coll.roman
        # Everyone else loses access: executing rivals turn around (a merge),
        # mere supporters drop back to uncommitted immediately.
        for other in self.collectives:
            if other.index == coll.index:
                continue
            if other.phase is Phase.EXECUTING and other.exec_target == target.id:
                self._resolve_merge_loss(winner=coll, loser=other, target=target)
                continue
            if other.committed_target == target.id:
                for agent in other.agents:
                    if agent.state is _C:
                        self._set_state(agent, _U, None, "occupied")
                        self._schedule_arrive(agent, self._dwell_ticks(other.rng))
                other.committed_target = None
                other.phase = Phase.DELIBERATING
                self._clear_msg_queues(other)
            for agent in other.agents:
                if agent.state is _F and agent.favored_target == target.id:
                    self._set_state(agent, _U, None, "occupied")
                    if not agent.at_hub and agent.activity in ("to_target", "from_target"):
                        self._set_leg(agent, other.hub_x, other.hub_y, "explore_back")
                        self._schedule_sensing(agent, other)
            other.ignored.discard(target.id)
        for c in self.collectives:
            self._refresh_sense_targets(c)
        self.complete_decision(coll.index)

    def _resolve_merge_loss(self, winner: Collective, loser: Collective, target: Target) -> None:
        self.emit(
            ev.MERGE_RESOLVED,
            {"winner": winner.roman, "loser": loser.roman, "target": str(target.id)},
        )
        pending = loser.pending or {}
        loser.decisions_made += 1
        self._emit_decision_completed(loser, pending, success=False, merge_loss=True)
        loser.pending = None
        # Turn the hub and every agent around toward the previous site.
        lx, ly = loser.hub_position_at(self.tick)
        loser.hub_x, loser.hub_y = lx, ly
        d = dist(lx, ly, loser.prev_hub_x, loser.prev_hub_y)
        eta = self._travel_ticks(d) if d > 0 else 1
        loser.phase = Phase.RELOCATING
        loser.exec_target = None
        loser.hub_leg = (lx, ly, loser.prev_hub_x, loser.prev_hub_y, self.tick, self.tick + eta)
        loser.hub_eta = self.tick + eta
        for agent in loser.agents:
            if not agent.lost:
                self._set_leg(agent, loser.prev_hub_x, loser.prev_hub_y, "exec")
        self._push(loser.hub_eta, _EV_HUB, loser.index, 0)

    def resolve_merge(self, winner_ci: int, loser_ci: int, target_id: int) -> None:
        """Spec-level merge entry point with protocol checks (used by tests)."""
        winner = self.collectives[winner_ci]
        loser = self.collectives[loser_ci]
        if not (
            winner.phase is Phase.EXECUTING
            and loser.phase is Phase.EXECUTING
            and winner.exec_target == target_id
            and loser.exec_target == target_id
        ):
            raise ProtocolError("resolve_merge requires two collectives executing toward the target")
        winner.hub_eta = self.tick
        winner.hub_x, winner.hub_y = winner.hub_position_at(self.tick)
        winner.hub_leg = None
        self._occupy_and_complete(winner, self.targets[target_id])

    def _emit_decision_completed(
        self, coll: Collective, pending: dict, success: bool, merge_loss: bool
    ) -> None:
        target_id = pending.get("target", coll.exec_target)
        target = self.targets.get(target_id)
        self.emit(
            ev.DECISION_COMPLETED,
            {
                "coll": coll.roman,
                "index": str(coll.decisions_made),
                "target": str(target_id),
                "value": str(target.value if target else ""),
                "success": "1" if success else "0",
                "oracle": str(pending.get("oracle", -1)),
                "merge_loss": "1" if merge_loss else "0",
                "trigger": pending.get("trigger", ""),
                "window_start": f"{pending.get('window_start_tick', 0) * self.dt:.3f}",
                "exec_start": f"{pending.get('exec_start_tick', 0) * self.dt:.3f}",
            },
        )

    def complete_decision(self, ci: int) -> None:
        """Finish a decision: relocate the hub, reset agents, purge assignments."""
        coll = self.collectives[ci]
        if coll.phase is Phase.EXECUTING:
            pending = coll.pending or {}
            coll.decisions_made += 1
            self._emit_decision_completed(coll, pending, success=bool(pending.get("success")), merge_loss=False)
            target = self.targets[coll.exec_target]
            coll.prev_hub_x, coll.prev_hub_y = coll.hub_x, coll.hub_y
            coll.hub_x, coll.hub_y = target.x, target.y
            coll.pending = None
        elif coll.phase is not Phase.RELOCATING:
            raise ProtocolError(f"complete_decision in phase {coll.phase.value}")
        coll.hub_leg = None
        coll.hub_eta = None
        coll.exec_target = None
        coll.committed_target = None
        coll.ignored.clear()
        coll.favor.clear()
        coll.adv.clear()
        coll.counts = {"U": COLLECTIVE_SIZE, "F": 0, "C": 0, "X": 0}
        self.processor.purge(coll.roman)
        for agent in coll.agents:
            agent.state = _U
            agent.favored_target = None
            agent.assessed_value = None
            agent.advocating = False
            agent.msg_queue.clear()
            if agent.lost:
                continue
            agent.x, agent.y = coll.hub_x, coll.hub_y
            self._park(agent, coll.hub_x, coll.hub_y)
            self._schedule_arrive(agent, self._dwell_ticks(coll.rng))
        coll.window_start = self.tick
        coll.phase = Phase.IDLE if coll.done else Phase.DELIBERATING
        self._refresh_sense_targets(coll)
        coll.dirty = True

    def _clear_msg_queues(self, coll: Collective) -> None:
        # Episodic queuing: phase transitions wipe in-flight messages.
        for agent in coll.agents:
            if agent.msg_queue:
                agent.msg_queue.clear()

    def _check_termination(self) -> None:
        if self.ended:
            return
        total = sum(c.decisions_made for c in self.collectives)
        reason = None
        if total >= self.config.decision_cap:
            reason = "decision-cap"
        elif self.t > self.config.duration_limit_s and total >= self.config.soft_cap:
            reason = "soft-cap"
        elif self.t >= 2 * self.config.duration_limit_s:
            reason = "hard-cap"
        if reason:
            self.ended = True
            self.end_reason = reason
            self.emit(
                ev.TRIAL_ENDED,
                {"reason": reason, "decisions": str(total), "duration_s": f"{self.t:.3f}"},
            )

    # ------------------------------------------------------------------
    # State serialization (for determinism checks)
    # ------------------------------------------------------------------

    def serialize_state(self) -> str:
        lines = [f"tick={self.tick} model={self.model.value} seed={self.seed} ended={int(self.ended)}"]
        for target in sorted(self.targets.values(), key=lambda t: t.id):
            lines.append(
                f"target {target.id} pos={target.x:.3f},{target.y:.3f} value={target.value} "
                f"disc={int(target.discovered)} evals={target.evaluations} occ={target.occupied_by or '-'}"
            )
        for coll in self.collectives:
            favor = ",".join(f"{t}:{n}" for t, n in sorted(coll.favor.items()))
            rng_tag = hashlib.sha256(repr(coll.rng.getstate()).encode()).hexdigest()[:12]
            lines.append(
                f"coll {coll.roman} hub={coll.hub_x:.3f},{coll.hub_y:.3f} phase={coll.phase.value} "
                f"decisions={coll.decisions_made} counts={coll.counts['U']}/{coll.counts['F']}/"
                f"{coll.counts['C']}/{coll.counts['X']} favor={favor} "
                f"ignored={','.join(map(str, sorted(coll.ignored)))} rng={rng_tag}"
            )
        for agent in self.agents:
            x, y = agent.position_at(self.tick)
            lines.append(
                f"agent {agent.id} st={agent.state.value} tgt={agent.favored_target} "
                f"pos={x:.3f},{y:.3f} act={agent.activity} adv={int(agent.advocating)}"
            )
        return "\n".join(lines)

    def state_digest(self) -> str:
        return hashlib.sha256(self.serialize_state().encode()).hexdigest()


def init_simulation(
    config: TrialComponentConfig,
    model: ModelKind,
    seed: int,
    params: DynamicsParams | None = None,
    snapshots: bool = True,
) -> Simulation:
    """Create a fresh simulation: 800 uncommitted agents, nothing discovered."""
    return Simulation(config, model, seed, params=params, snapshots=snapshots)


def step(sim: Simulation, dt: float | None = None) -> tuple[Simulation, list[ev.EventRecord]]:
    """Advance by `dt` seconds (default one tick); returns (state, new events)."""
    if dt is None:
        n = 1
    else:
        if dt <= 0:
            raise ConfigurationError("dt must be positive")
        n = max(1, round(dt / sim.params.dt))
    records = sim.step(n)
    return sim, records
