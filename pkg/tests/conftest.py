import pytest

from hubswarm.commands import Command, CommandKind
from hubswarm.core import AgentState, DynamicsParams, ModelKind
from hubswarm.engine import Simulation, init_simulation
from hubswarm.scenario import TrialComponentConfig, generate_component


def make_sim(
    difficulty: str = "easy",
    scenario_seed: int = 11,
    model: ModelKind = ModelKind.M2,
    seed: int = 5,
    snapshots: bool = False,
    **param_overrides,
) -> Simulation:
    cfg = generate_component(difficulty, scenario_seed)
    params = DynamicsParams(**param_overrides) if param_overrides else None
    return init_simulation(cfg, model, seed, params=params, snapshots=snapshots)


def in_range_target(sim: Simulation, ci: int, discovered: bool = True) -> int:
    """Pick the first config target inside collective ci's search region."""
    cfg: TrialComponentConfig = sim.config
    region = cfg.region_targets(ci)
    tid = sorted(t.id for t in region)[0]
    if discovered:
        sim.targets[tid].discovered = True
    return tid


def force_support(sim: Simulation, ci: int, tid: int, n: int) -> None:
    """Convert n at-hub uncommitted agents to favoring tid (test scaffolding)."""
    sim.targets[tid].discovered = True
    coll = sim.collectives[ci]
    converted = 0
    for at_hub_pass in (True, False):
        for agent in coll.agents:
            if converted >= n:
                break
            if agent.state is AgentState.UNCOMMITTED and agent.at_hub == at_hub_pass:
                sim._set_state(agent, AgentState.FAVORING, tid, "test", log=False)
                converted += 1
    assert converted == n, f"could only fabricate {converted} of {n} supporters"


def issue(sim: Simulation, kind: CommandKind, ci_roman: str, tid: int, at: float | None = None) -> None:
    """Enqueue a command and advance one tick so it applies."""
    cmd = Command(kind=kind, collective_id=ci_roman, target_id=tid, issued_at=sim.t if at is None else at)
    tick = sim.enqueue_command(cmd)
    sim.run_to_tick(tick)


@pytest.fixture
def easy_sim() -> Simulation:
    return make_sim()
