import pytest

from hubswarm.commands import CommandKind
from hubswarm.core import (
    AgentState,
    ModelKind,
    Phase,
    ProtocolError,
    SimulationError,
    dist,
)
from hubswarm.engine import init_simulation, step
from hubswarm.events import (
    DECISION_COMPLETED,
    EXECUTION_STARTED,
    HUB_ARRIVED,
    MERGE_RESOLVED,
    QUORUM_REACHED,
    TARGET_DISCOVERED,
)
from hubswarm.scenario import generate_component

from conftest import force_support, in_range_target, issue, make_sim


# ---------------------------------------------------------------------------
# init_simulation
# ---------------------------------------------------------------------------

def test_init_all_uncommitted_nothing_discovered():
    sim = make_sim(model=ModelKind.M2_SIM, scenario_seed=7, seed=7)
    assert len(sim.agents) == 800
    assert all(a.state is AgentState.UNCOMMITTED for a in sim.agents)
    assert all(not t.discovered for t in sim.targets.values())
    assert sim.tick == 0
    for ci in range(4):
        snap = sim.support_snapshot(ci)
        assert snap.counts == {"U": 200, "F": 0, "C": 0, "X": 0}


def test_init_deterministic_bit_identical():
    a = make_sim(seed=123)
    b = make_sim(seed=123)
    assert a.serialize_state() == b.serialize_state()
    assert a.state_digest() == b.state_digest()
    c = make_sim(seed=124)
    assert a.state_digest() != c.state_digest()


def test_init_m3_disables_consensus_hooks():
    sim = make_sim(model=ModelKind.M3, difficulty="hard", scenario_seed=1, seed=1)
    assert sim.model is ModelKind.M3
    assert not sim.model.autonomous_consensus


def test_init_rejects_malformed_config():
    cfg = generate_component("easy", 3)
    cfg.targets = cfg.targets[:-1]
    with pytest.raises(Exception):
        init_simulation(cfg, ModelKind.M2, 1)


# ---------------------------------------------------------------------------
# step / motion / discovery
# ---------------------------------------------------------------------------

def test_step_emits_discovery_when_path_crosses_target():
    sim = make_sim()
    tid = in_range_target(sim, 0, discovered=False)
    target = sim.targets[tid]
    agent = sim.collectives[0].agents[0]
    # Park the agent 3 m short of the target, then fly it straight through.
    agent.leg_x0 = agent.leg_x1 = target.x - 3.0
    agent.leg_y0 = agent.leg_y1 = target.y
    sim._set_leg(agent, target.x + 50.0, target.y, "explore_out")
    sim._schedule_sensing(agent, sim.collectives[0])
    _, records = step(sim)
    assert any(
        r.kind == TARGET_DISCOVERED and r.payload["target"] == str(tid) for r in records
    ), "discovery must fire within one tick of crossing the sensing radius"
    assert sim.targets[tid].discovered


def test_step_returns_events_and_advances_clock():
    sim = make_sim()
    t0 = sim.t
    _, records = step(sim, 1.0)
    assert sim.t == pytest.approx(t0 + 1.0)
    assert isinstance(records, list)


def test_agent_count_conserved_under_stepping():
    sim = make_sim(model=ModelKind.M2_SIM, seed=77)
    for _ in range(60):
        step(sim, 5.0)
        for ci in range(4):
            snap = sim.support_snapshot(ci)  # verify() runs inside
            assert sum(snap.counts.values()) == 200


# ---------------------------------------------------------------------------
# quorum / execution thresholds
# ---------------------------------------------------------------------------

def test_quorum_fires_at_60_of_200():
    sim = make_sim()
    tid = in_range_target(sim, 0)
    for _ in range(6):
        issue(sim, CommandKind.INVESTIGATE, "I", tid)
    quorums = [r for r in sim.log.records if r.kind == QUORUM_REACHED]
    assert len(quorums) == 1
    assert quorums[0].payload == {
        "coll": "I",
        "target": str(tid),
        "support": "60",
        "threshold": "60",
    }
    assert sim.collectives[0].phase is Phase.COMMITTED


def test_no_quorum_at_59():
    sim = make_sim()
    tid = in_range_target(sim, 0)
    force_support(sim, 0, tid, 59)
    sim.run_to_tick(sim.tick + 1)
    assert not [r for r in sim.log.records if r.kind == QUORUM_REACHED]
    assert sim.collectives[0].phase is Phase.DELIBERATING


def test_autonomous_execution_at_100_of_200():
    sim = make_sim()
    tid = in_range_target(sim, 0)
    for _ in range(10):
        issue(sim, CommandKind.INVESTIGATE, "I", tid)
    starts = [r for r in sim.log.records if r.kind == EXECUTION_STARTED]
    assert len(starts) == 1
    assert starts[0].payload["trigger"] == "autonomous"
    assert int(starts[0].payload["support"]) >= 100
    assert sim.collectives[0].phase is Phase.EXECUTING


def test_no_execution_at_99_support():
    sim = make_sim()
    tid = in_range_target(sim, 0)
    force_support(sim, 0, tid, 99)
    sim.run_to_tick(sim.tick + 1)
    assert not [r for r in sim.log.records if r.kind == EXECUTION_STARTED]


def test_decide_triggers_execution_below_50_percent():
    sim = make_sim()
    tid = in_range_target(sim, 0)
    force_support(sim, 0, tid, 62)
    sim.run_to_tick(sim.tick + 1)  # quorum fires at 62
    issue(sim, CommandKind.DECIDE, "I", tid)
    starts = [r for r in sim.log.records if r.kind == EXECUTION_STARTED]
    assert len(starts) == 1
    assert starts[0].payload["trigger"] == "decide"
    assert int(starts[0].payload["support"]) < 100


def test_begin_execution_precondition_guard():
    sim = make_sim()
    tid = in_range_target(sim, 0)
    force_support(sim, 0, tid, 10)
    with pytest.raises(SimulationError):
        sim.begin_execution(0, tid, trigger="autonomous")


def test_m3_never_reaches_quorum_autonomously():
    sim = make_sim(model=ModelKind.M3, seed=31)
    sim.run_to_time(300)
    assert not [r for r in sim.log.records if r.kind == QUORUM_REACHED]
    assert not [r for r in sim.log.records if r.kind == EXECUTION_STARTED]


def test_m3_decide_is_the_only_path_to_execution():
    sim = make_sim(model=ModelKind.M3)
    tid = in_range_target(sim, 0)
    for _ in range(7):
        issue(sim, CommandKind.INVESTIGATE, "I", tid)
    assert not [r for r in sim.log.records if r.kind == QUORUM_REACHED]
    issue(sim, CommandKind.DECIDE, "I", tid)
    starts = [r for r in sim.log.records if r.kind == EXECUTION_STARTED]
    assert len(starts) == 1
    assert starts[0].payload["trigger"] == "decide"


# ---------------------------------------------------------------------------
# merge / completion
# ---------------------------------------------------------------------------

def race_two_collectives(sim):
    """Drive collectives sharing an overlap target into a merge race."""
    a, b, tid = sim.config.overlap_pairs[0]
    sim.targets[tid].discovered = True
    for ci in (a, b):
        force_support(sim, ci, tid, 62)
    sim.run_to_tick(sim.tick + 1)
    for ci in (a, b):
        issue(sim, CommandKind.DECIDE, sim.collectives[ci].roman, tid)
    return a, b, tid


def test_merge_winner_occupies_loser_returns():
    sim = make_sim(scenario_seed=21)
    a, b, tid = race_two_collectives(sim)
    ca, cb = sim.collectives[a], sim.collectives[b]
    origin_a = (ca.prev_hub_x, ca.prev_hub_y)
    origin_b = (cb.prev_hub_x, cb.prev_hub_y)
    da = dist(*origin_a, sim.targets[tid].x, sim.targets[tid].y)
    db = dist(*origin_b, sim.targets[tid].x, sim.targets[tid].y)
    winner, loser = (ca, cb) if da < db else (cb, ca)
    loser_origin = origin_b if loser is cb else origin_a
    sim.run_to_time(sim.t + 120)
    merges = [r for r in sim.log.records if r.kind == MERGE_RESOLVED]
    assert len(merges) == 1
    assert merges[0].payload["winner"] == winner.roman
    assert merges[0].payload["loser"] == loser.roman
    assert sim.targets[tid].occupied_by == winner.roman
    # Both decision counters incremented; loser recorded as an unsuccessful
    # decision and returned to its previous hub site.
    assert winner.decisions_made == 1
    assert loser.decisions_made == 1
    decisions = {r.payload["coll"]: r.payload for r in sim.log.records if r.kind == DECISION_COMPLETED}
    assert decisions[loser.roman]["merge_loss"] == "1"
    assert decisions[loser.roman]["success"] == "0"
    assert (loser.hub_x, loser.hub_y) == pytest.approx(loser_origin)
    homecomings = [
        r
        for r in sim.log.records
        if r.kind == HUB_ARRIVED and r.payload["coll"] == loser.roman and r.payload["target"] == "home"
    ]
    assert homecomings, "loser must arrive back at its previous hub"


def test_resolve_merge_requires_two_executing():
    sim = make_sim()
    tid = in_range_target(sim, 0)
    with pytest.raises(ProtocolError):
        sim.resolve_merge(0, 1, tid)


def test_simultaneous_arrival_breaks_to_lower_roman_id():
    sim = make_sim(scenario_seed=21)
    a, b, tid = race_two_collectives(sim)
    ca, cb = sim.collectives[a], sim.collectives[b]
    # Force a dead heat: align both hub arrivals on the same future tick.
    eta = max(ca.hub_eta, cb.hub_eta)
    for coll in (ca, cb):
        x0, y0, x1, y1, t0, _ = coll.hub_leg
        coll.hub_leg = (x0, y0, x1, y1, t0, eta)
        coll.hub_eta = eta
    sim.run_to_tick(eta)
    assert sim.targets[tid].occupied_by == sim.collectives[min(a, b)].roman


def test_occupied_target_vanishes_from_other_collectives():
    sim = make_sim(scenario_seed=21)
    a, b, tid = race_two_collectives(sim)
    sim.run_to_time(sim.t + 120)
    # The occupied target must never appear in any snapshot again.
    for _ in range(20):
        step(sim, 5.0)
        for ci in range(4):
            snap = sim.support_snapshot(ci)
            assert tid not in snap.reported_favoring
            assert snap.support(tid) in (0,)


def test_complete_decision_resets_collective():
    sim = make_sim()
    tid = in_range_target(sim, 0)
    # Park an abandon assignment that must be purged on completion.
    other = sorted(t.id for t in sim.config.region_targets(0))[1]
    sim.targets[other].discovered = True
    sim.targets[other].evaluations = 2
    issue(sim, CommandKind.ABANDON, "I", other)
    assert sim.processor.assignments_for("I")
    for _ in range(10):
        issue(sim, CommandKind.INVESTIGATE, "I", tid)
    coll = sim.collectives[0]
    deadline = sim.tick + 90 * sim.per_sec
    while coll.decisions_made < 1 and sim.tick < deadline:
        sim.run_to_tick(sim.tick + 1)
    assert coll.decisions_made == 1
    assert (coll.hub_x, coll.hub_y) == (sim.targets[tid].x, sim.targets[tid].y)
    snap = sim.support_snapshot(0)
    assert snap.counts["U"] == 200, "everyone resets to uncommitted at the new hub"
    assert not coll.ignored
    assert sim.processor.assignments_for("I") == []
    assert all(not a.msg_queue for a in coll.agents)


def test_collective_stops_after_decision_quota():
    sim = make_sim(scenario_seed=4, seed=4)
    coll = sim.collectives[0]
    for _ in range(2):
        tid = max(
            (t for t in sim.config.targets
             if t.id not in {x.id for x in sim.targets.values() if x.occupied_by}
             and dist(t.x, t.y, coll.hub_x, coll.hub_y) <= 500),
            key=lambda t: t.value,
        ).id
        sim.targets[tid].discovered = True
        force_support(sim, 0, tid, 70)
        sim.run_to_tick(sim.tick + 1)
        issue(sim, CommandKind.DECIDE, "I", tid)
        sim.run_to_time(sim.t + 80)
    assert coll.decisions_made == 2
    assert coll.phase is Phase.IDLE


# ---------------------------------------------------------------------------
# episodic queuing / support snapshot
# ---------------------------------------------------------------------------

def test_support_snapshot_after_investigates():
    sim = make_sim()
    tid = in_range_target(sim, 0)
    issue(sim, CommandKind.INVESTIGATE, "I", tid)
    snap = sim.support_snapshot(0)
    assert snap.favoring.get(tid, 0) >= 10
    assert snap.counts["F"] >= 10


def test_support_snapshot_unknown_collective():
    sim = make_sim()
    with pytest.raises(KeyError):
        sim.support_snapshot(9)


def test_msg_queues_empty_after_phase_transition():
    sim = make_sim()
    tid = in_range_target(sim, 0)
    for agent in sim.collectives[0].agents[:50]:
        agent.msg_queue.append("recruit")
    force_support(sim, 0, tid, 60)
    sim.run_to_tick(sim.tick + 1)
    assert sim.collectives[0].phase is Phase.COMMITTED
    assert all(not a.msg_queue for a in sim.collectives[0].agents)


def test_determinism_identical_runs_identical_logs():
    logs = []
    for _ in range(2):
        sim = make_sim(model=ModelKind.M2_SIM, scenario_seed=42, seed=42, snapshots=True)
        sim.run_to_time(120)
        logs.append([r.serialize() for r in sim.log.records])
    assert logs[0] == logs[1]
    assert logs[0], "two minutes of simulation must produce events"


# ---------------------------------------------------------------------------
# trial termination rules
# ---------------------------------------------------------------------------

def set_decisions(sim, counts):
    for coll, n in zip(sim.collectives, counts):
        coll.decisions_made = n


def test_termination_decision_cap():
    sim = make_sim()
    set_decisions(sim, [2, 2, 2, 2])
    sim._check_termination()
    assert sim.ended and sim.end_reason == "decision-cap"


def test_termination_soft_cap_after_limit():
    sim = make_sim()
    set_decisions(sim, [2, 2, 1, 1])  # six decisions
    sim.tick = int(601 / sim.dt)
    sim._check_termination()
    assert sim.ended and sim.end_reason == "soft-cap"


def test_past_limit_with_five_decisions_continues():
    sim = make_sim()
    set_decisions(sim, [2, 2, 1, 0])  # five decisions
    sim.tick = int(601 / sim.dt)
    sim._check_termination()
    assert not sim.ended, "the rule conjunction reads literally: wait for the sixth decision"


def test_termination_hard_wall_at_double_duration():
    sim = make_sim()
    set_decisions(sim, [1, 0, 0, 0])
    sim.tick = int(1200 / sim.dt)
    sim._check_termination()
    assert sim.ended and sim.end_reason == "hard-cap"


def test_lost_entities_flag_preserves_conservation():
    sim = make_sim(seed=61, lost_entities_enabled=True, lost_entity_rate=0.2)
    tid = in_range_target(sim, 0)
    sim.run_to_time(30)  # get agents airborne first
    for _ in range(10):
        issue(sim, CommandKind.INVESTIGATE, "I", tid)
    sim.run_to_time(sim.t + 120)
    lost = [a for a in sim.collectives[0].agents if a.lost]
    assert lost, "with a 20% loss rate some in-flight agents must strand"
    assert sim.collectives[0].decisions_made >= 1
    snap = sim.support_snapshot(0)  # conservation still verified inside
    assert sum(snap.counts.values()) == 200
