import pytest

from hubswarm.commands import (
    Command,
    CommandKind,
    IllegalReason,
    INVESTIGATE_CONVERSIONS,
    validate_command,
)
from hubswarm.core import AgentState, EntityLookupError, ModelKind, ProtocolError, dist
from hubswarm.events import COMMAND_VERDICT, SYSTEM_MESSAGE

from conftest import force_support, in_range_target, issue, make_sim


def out_of_range_target(sim, ci):
    coll = sim.collectives[ci]
    for t in sorted(sim.config.targets, key=lambda t: t.id):
        if dist(t.x, t.y, coll.hub_x, coll.hub_y) > 500.0:
            sim.targets[t.id].discovered = True
            return t.id
    raise AssertionError("layout has no out-of-range target")


def last_verdict(sim):
    return [r for r in sim.log.records if r.kind == COMMAND_VERDICT][-1]


def illegal_messages(sim):
    return [r for r in sim.log.records if r.kind == SYSTEM_MESSAGE and r.payload.get("category") == "illegal"]


# ---------------------------------------------------------------------------
# validate_command: the three illegal cases
# ---------------------------------------------------------------------------

def test_investigate_out_of_range_is_illegal():
    sim = make_sim()
    tid = out_of_range_target(sim, 0)
    cmd = Command(CommandKind.INVESTIGATE, "I", tid, issued_at=0.0)
    assert validate_command(cmd, sim) is IllegalReason.OUT_OF_RANGE


def test_abandon_unvalued_target_is_illegal():
    sim = make_sim()
    tid = in_range_target(sim, 0)          # discovered, zero evaluations: white
    cmd = Command(CommandKind.ABANDON, "I", tid, issued_at=0.0)
    assert validate_command(cmd, sim) is IllegalReason.UNVALUED_TARGET


def test_decide_below_quorum_is_illegal():
    sim = make_sim()
    tid = in_range_target(sim, 0)
    force_support(sim, 0, tid, 59)
    cmd = Command(CommandKind.DECIDE, "I", tid, issued_at=0.0)
    assert validate_command(cmd, sim) is IllegalReason.BELOW_QUORUM


def test_abandon_assessed_in_range_target_is_legal():
    sim = make_sim()
    tid = in_range_target(sim, 0)
    sim.targets[tid].evaluations = 2
    cmd = Command(CommandKind.ABANDON, "I", tid, issued_at=0.0)
    assert validate_command(cmd, sim) is None


def test_unknown_ids_raise_lookup_not_illegal():
    sim = make_sim()
    with pytest.raises(EntityLookupError):
        validate_command(Command(CommandKind.INVESTIGATE, "I", 99, issued_at=0.0), sim)
    with pytest.raises(EntityLookupError):
        validate_command(Command(CommandKind.INVESTIGATE, "VII", 0, issued_at=0.0), sim)
    # Undiscovered targets are invisible to the operator: also a lookup error.
    tid = in_range_target(sim, 0, discovered=False)
    with pytest.raises(EntityLookupError):
        validate_command(Command(CommandKind.INVESTIGATE, "I", tid, issued_at=0.0), sim)


def test_busy_collective_rejects_commands_as_protocol_error():
    sim = make_sim()
    tid = in_range_target(sim, 0)
    force_support(sim, 0, tid, 70)
    sim.run_to_tick(sim.tick + 1)
    issue(sim, CommandKind.DECIDE, "I", tid)
    assert sim.collectives[0].phase.value == "executing"
    with pytest.raises(ProtocolError):
        validate_command(Command(CommandKind.INVESTIGATE, "I", tid, issued_at=sim.t), sim)


# ---------------------------------------------------------------------------
# full command handling through the tick loop
# ---------------------------------------------------------------------------

def test_illegal_command_leaves_state_unchanged_with_one_message():
    sim = make_sim()
    tid = in_range_target(sim, 0)
    force_support(sim, 0, tid, 30)
    sim.run_to_tick(sim.tick + 1)
    digest_before = sim.state_digest()
    # Apply at this very boundary so no simulation time passes in between.
    sim.apply_command(Command(CommandKind.DECIDE, "I", tid, issued_at=sim.t))
    assert last_verdict(sim).payload["verdict"] == "illegal"
    assert last_verdict(sim).payload["reason"] == "below_quorum"
    assert len(illegal_messages(sim)) == 1
    assert sim.state_digest() == digest_before


def test_investigate_converts_exactly_ten():
    sim = make_sim()
    tid = in_range_target(sim, 0)
    issue(sim, CommandKind.INVESTIGATE, "I", tid)
    snap = sim.support_snapshot(0)
    assert snap.favoring[tid] == INVESTIGATE_CONVERSIONS == 10
    [a] = sim.processor.assignments_for("I")
    assert a.status == "complete"
    assert a.ack_count == 10


def test_investigate_stacks_on_reissue():
    sim = make_sim()
    tid = in_range_target(sim, 0)
    issue(sim, CommandKind.INVESTIGATE, "I", tid)
    issue(sim, CommandKind.INVESTIGATE, "I", tid)
    assert sim.support_snapshot(0).favoring[tid] == 20
    assert len(sim.processor.assignments_for("I")) == 2


def test_investigate_with_few_uncommitted_stays_active_until_ten():
    sim = make_sim()
    tid = in_range_target(sim, 0)
    coll = sim.collectives[0]
    # Leave only 6 uncommitted agents at the hub; the rest leave for a long flight.
    other = [t for t in sim.config.region_targets(0) if t.id != tid][0]
    sim.targets[other.id].discovered = True
    for agent in coll.agents[6:]:
        sim._set_state(agent, AgentState.FAVORING, other.id, "test", log=False)
        sim._set_leg(agent, other.x, other.y, "to_target")
    issue(sim, CommandKind.INVESTIGATE, "I", tid)
    [assignment] = [a for a in sim.processor.assignments_for("I") if a.command.kind is CommandKind.INVESTIGATE]
    assert assignment.ack_count == 6
    assert assignment.status == "active"
    # As favoring agents abandon/return and re-enter uncommitted, the
    # assignment keeps absorbing acknowledgments but never exceeds ten.
    sim.run_to_time(sim.t + 240)
    assert assignment.ack_count <= 10
    assert sim.support_snapshot(0).favoring.get(tid, 0) >= 6


def test_abandon_drains_support_and_reports_zero_immediately():
    sim = make_sim()
    tid = in_range_target(sim, 0)
    sim.targets[tid].evaluations = 2
    force_support(sim, 0, tid, 40)
    sim.run_to_tick(sim.tick + 1)
    issue(sim, CommandKind.ABANDON, "I", tid)
    # Reported support reads zero immediately, even while agents drain.
    assert sim.reported_support(0, tid) == 0
    assert sim.support_snapshot(0).support(tid) == 0
    sim.run_to_time(sim.t + 200)
    assert sim.support_snapshot(0).favoring.get(tid, 0) == 0, "physical drain completes"
    assert tid in sim.collectives[0].ignored


def test_abandon_is_idempotent():
    sim = make_sim()
    tid = in_range_target(sim, 0)
    sim.targets[tid].evaluations = 2
    force_support(sim, 0, tid, 20)
    sim.run_to_tick(sim.tick + 1)
    sim.apply_command(Command(CommandKind.ABANDON, "I", tid, issued_at=sim.t))
    digest = sim.state_digest()
    n_assignments = len(sim.processor.assignments)
    sim.apply_command(Command(CommandKind.ABANDON, "I", tid, issued_at=sim.t))
    assert last_verdict(sim).payload["verdict"] == "legal"
    assert sim.state_digest() == digest
    assert len(sim.processor.assignments) == n_assignments


def test_abandon_does_not_touch_other_collectives():
    sim = make_sim(scenario_seed=21)
    a, b, tid = sim.config.overlap_pairs[0]
    sim.targets[tid].discovered = True
    sim.targets[tid].evaluations = 2
    force_support(sim, a, tid, 20)
    force_support(sim, b, tid, 25)
    sim.run_to_tick(sim.tick + 1)
    issue(sim, CommandKind.ABANDON, sim.collectives[a].roman, tid)
    assert sim.reported_support(a, tid) == 0
    assert sim.reported_support(b, tid) == 25


def test_cancel_abandon_restores_eligibility():
    sim = make_sim()
    tid = in_range_target(sim, 0)
    sim.targets[tid].evaluations = 2
    force_support(sim, 0, tid, 10)
    sim.run_to_tick(sim.tick + 1)
    issue(sim, CommandKind.ABANDON, "I", tid)
    issue(sim, CommandKind.CANCEL_ABANDON, "I", tid)
    assert tid not in sim.collectives[0].ignored
    assert sim.processor.assignments_for("I") == []
    # Support rebuilds only via dynamics; an investigate can now land again.
    issue(sim, CommandKind.INVESTIGATE, "I", tid)
    assert sim.support_snapshot(0).favoring.get(tid, 0) >= 10


def test_cancel_abandon_twice_is_an_error():
    sim = make_sim()
    tid = in_range_target(sim, 0)
    sim.targets[tid].evaluations = 2
    issue(sim, CommandKind.ABANDON, "I", tid)
    issue(sim, CommandKind.CANCEL_ABANDON, "I", tid)
    issue(sim, CommandKind.CANCEL_ABANDON, "I", tid)
    assert last_verdict(sim).payload["verdict"] == "error"


def test_decide_during_anothers_execution_sets_up_merge():
    sim = make_sim(scenario_seed=21)
    a, b, tid = sim.config.overlap_pairs[0]
    sim.targets[tid].discovered = True
    force_support(sim, a, tid, 62)
    sim.run_to_tick(sim.tick + 1)
    issue(sim, CommandKind.DECIDE, sim.collectives[a].roman, tid)
    assert sim.collectives[a].phase.value == "executing"
    force_support(sim, b, tid, 62)
    sim.run_to_tick(sim.tick + 1)
    issue(sim, CommandKind.DECIDE, sim.collectives[b].roman, tid)
    assert sim.collectives[b].phase.value == "executing"
    sim.run_to_time(sim.t + 120)
    assert [r for r in sim.log.records if r.kind == "MergeResolved"]


def test_every_command_yields_delta_or_single_illegal_message():
    sim = make_sim()
    tid = in_range_target(sim, 0)
    checks = 0
    for kind, target in [
        (CommandKind.INVESTIGATE, tid),
        (CommandKind.DECIDE, tid),
        (CommandKind.ABANDON, tid),
    ]:
        before_digest = sim.state_digest()
        before_msgs = len(illegal_messages(sim))
        sim.apply_command(Command(kind, "I", target, issued_at=sim.t))
        verdict = last_verdict(sim).payload["verdict"]
        if verdict == "legal":
            assert sim.state_digest() != before_digest
            assert len(illegal_messages(sim)) == before_msgs
        else:
            assert sim.state_digest() == before_digest
            assert len(illegal_messages(sim)) == before_msgs + 1
        checks += 1
    assert checks == 3
