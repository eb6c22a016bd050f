"""Domain types shared across the simulator.

Four collectives of 200 agents each search a ~2 km^2 world for 16 targets
per trial component. Agents move between one of four behavioral states
(uncommitted / favoring / committed / executing); each collective advances
through deliberation, commitment, execution, and hub relocation phases.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

ROMAN_IDS = ("I", "II", "III", "IV")

COLLECTIVE_SIZE = 200
N_COLLECTIVES = 4
N_TARGETS = 16
SEARCH_RADIUS_M = 500.0

# Hub-level decision thresholds, as fractions of the collective population.
QUORUM_FRACTION = 0.30      # favoring support that triggers commitment (60/200)
EXECUTE_FRACTION = 0.50     # support that triggers autonomous execution (100/200)

VALUE_MIN = 67
VALUE_MAX = 100


class AgentState(str, Enum):
    UNCOMMITTED = "U"
    FAVORING = "F"
    COMMITTED = "C"
    EXECUTING = "X"


class Phase(str, Enum):
    """Collective-level lifecycle phase."""

    DELIBERATING = "deliberating"
    COMMITTED = "committed"       # quorum detected, commitment spreading
    EXECUTING = "executing"       # hub moving to the selected target
    RELOCATING = "relocating"     # hub returning to its previous site after a merge loss
    IDLE = "idle"                 # per-collective decision quota exhausted


class ModelKind(str, Enum):
    """Algorithmic model variants.

    M2 builds consensus autonomously and accepts operator commands. M3 can
    search and assess but never amplifies support on its own: no quorum
    commitment and no agent-to-agent recruitment, so an operator decide is
    the only path to execution. M2_SIM is M2 run without any operator.
    """

    M2 = "m2"
    M3 = "m3"
    M2_SIM = "m2sim"

    @property
    def autonomous_consensus(self) -> bool:
        return self is not ModelKind.M3


@dataclass
class DynamicsParams:
    """Tunable rates for the value-sensitive decision dynamics.

    All probabilities are per hub visit (or per target reassessment);
    travel imposes the physical interaction delay, so distant targets take
    proportionally longer to build support. `interactions_per_visit` scales
    how many peers an agent samples inside the hub per visit.
    """

    # Defaults are the calibrated cell from the headless baseline batches
    # (see `sim calibrate`): overall mean decision time ~4.8 min with easy
    # ~4.0 and hard ~5.8, overall selection success ~70%.
    discovery_rate: float = 0.45          # chance of favoring a target on sensing it, scaled by value
    abandon_rate: float = 0.15            # chance of dropping a target per reassessment, scaled by 1-value
    recruit_rate: float = 1.0             # per-interaction recruitment success scale
    cross_inhibition: float = 0.90        # per-interaction inhibition scale, scaled by rival value
    agent_speed: float = 10.0             # m/s
    sensing_radius: float = 25.0          # m
    interactions_per_visit: int = 3
    value_floor: float = 60.0             # value -> weight remap origin; 0 keeps plain v/100
    interaction_delay_enabled: bool = True
    interaction_frequency_multiplier: float = 1.0
    hub_dwell_s: float = 2.0              # pause inside the hub between flights
    assessment_noise: float = 0.0         # sd of value-estimate noise; 0 = exact readings
    lost_entities_enabled: bool = False   # reproduce stragglers that miss a hub move
    lost_entity_rate: float = 0.01
    dt: float = 0.1                       # tick length in seconds

    def validate(self) -> None:
        for name in ("discovery_rate", "abandon_rate", "recruit_rate", "cross_inhibition"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ConfigurationError(f"{name} must be in [0, 1], got {v}")
        if self.agent_speed <= 0:
            raise ConfigurationError(f"agent_speed must be positive, got {self.agent_speed}")
        if self.interactions_per_visit < 1:
            raise ConfigurationError("interactions_per_visit must be >= 1")
        if self.interaction_frequency_multiplier <= 0:
            raise ConfigurationError("interaction_frequency_multiplier must be positive")
        if self.dt <= 0:
            raise ConfigurationError("dt must be positive")
        if not 0.0 <= self.value_floor < 100.0:
            raise ConfigurationError("value_floor must be in [0, 100)")

    @property
    def effective_interactions(self) -> float:
        return self.interactions_per_visit * self.interaction_frequency_multiplier

    def value_weight(self, value: float) -> float:
        """Map a target value onto [0, 1] selection pressure.

        With the default floor the 67..100 range spreads over ~0.27..1.0
        instead of the nearly flat 0.67..1.0, which is what lets the
        collective actually discriminate between mediocre and good targets.
        """
        return max(0.0, value - self.value_floor) / (100.0 - self.value_floor)

    def to_dict(self) -> dict:
        return {
            "discovery_rate": self.discovery_rate,
            "abandon_rate": self.abandon_rate,
            "recruit_rate": self.recruit_rate,
            "cross_inhibition": self.cross_inhibition,
            "agent_speed": self.agent_speed,
            "sensing_radius": self.sensing_radius,
            "interactions_per_visit": self.interactions_per_visit,
            "value_floor": self.value_floor,
            "interaction_delay_enabled": self.interaction_delay_enabled,
            "interaction_frequency_multiplier": self.interaction_frequency_multiplier,
            "hub_dwell_s": self.hub_dwell_s,
            "assessment_noise": self.assessment_noise,
            "lost_entities_enabled": self.lost_entities_enabled,
            "lost_entity_rate": self.lost_entity_rate,
            "dt": self.dt,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "DynamicsParams":
        params = cls(**data)
        params.validate()
        return params


class SimulationError(Exception):
    """Base class for simulator faults."""


class ConfigurationError(SimulationError):
    """Malformed trial configuration or parameters."""


class ProtocolError(SimulationError):
    """An operation was invoked outside its legal protocol state."""


class EntityLookupError(SimulationError, KeyError):
    """Unknown collective or target id (distinct from an illegal command)."""


@dataclass
class Target:
    """A selectable site. Values live in [67, 100]; higher is better.

    A target becomes `discovered` when any agent first senses it and
    `assessed` once at least two agents have physically evaluated it.
    Occupation is permanent and hides the target from everyone.
    """

    id: int
    x: float
    y: float
    value: int
    discovered: bool = False
    evaluations: int = 0
    occupied_by: str | None = None  # roman id of the occupying collective

    @property
    def assessed(self) -> bool:
        return self.evaluations >= 2

    @property
    def visible(self) -> bool:
        return self.discovered and self.occupied_by is None

    def pos(self) -> tuple[float, float]:
        return (self.x, self.y)


@dataclass
class Agent:
    """One collective entity.

    Motion is stored as the current straight leg; positions in between are
    interpolated on demand. `leg_token` invalidates stale scheduled events
    whenever the agent is re-routed.
    """

    id: int
    collective: int                      # index 0..3 into SimState.collectives
    x: float
    y: float
    state: AgentState = AgentState.UNCOMMITTED
    favored_target: int | None = None
    assessed_value: float | None = None
    at_hub: bool = True
    msg_queue: list[str] = field(default_factory=list)

    # Motion leg (engine internals).
    leg_x0: float = 0.0
    leg_y0: float = 0.0
    leg_x1: float = 0.0
    leg_y1: float = 0.0
    leg_t0: int = 0                      # ticks
    leg_t1: int = 0
    leg_token: int = 0
    activity: str = "idle"               # idle|explore_out|explore_back|to_target|from_target|exec
    advocating: bool = False             # favoring agents recruit only after their first round trip
    lost: bool = False

    @property
    def hub_id(self) -> str:
        return ROMAN_IDS[self.collective]

    def position_at(self, tick: int) -> tuple[float, float]:
        if tick >= self.leg_t1 or self.leg_t1 <= self.leg_t0:
            return (self.leg_x1, self.leg_y1)
        if tick <= self.leg_t0:
            return (self.leg_x0, self.leg_y0)
        frac = (tick - self.leg_t0) / (self.leg_t1 - self.leg_t0)
        return (
            self.leg_x0 + (self.leg_x1 - self.leg_x0) * frac,
            self.leg_y0 + (self.leg_y1 - self.leg_y0) * frac,
        )

    @property
    def travel_eta(self) -> int:
        """Ticks remaining on the current leg (0 when parked)."""
        return max(0, self.leg_t1 - self.leg_t0)


@dataclass
class SupportSnapshot:
    """Read-only view of one collective's per-state and per-target counts.

    `favoring` holds the physical per-target favoring counts (they sum to
    the F count). `reported_favoring` applies the operator-facing rule that
    an abandoned target reads zero support immediately, before the agents
    have physically drained back to uncommitted.
    """

    collective_id: str
    t: float
    counts: dict[str, int]                 # keys U/F/C/X
    favoring: dict[int, int]
    committed_target: int | None
    ignored: frozenset[int]

    @property
    def reported_favoring(self) -> dict[int, int]:
        return {t: n for t, n in self.favoring.items() if t not in self.ignored}

    def support(self, target_id: int) -> int:
        """Operator-facing support: favoring plus committed, zero if ignored."""
        if target_id in self.ignored:
            return 0
        n = self.favoring.get(target_id, 0)
        if self.committed_target == target_id:
            n += self.counts["C"]
        return n

    def verify(self, total: int = COLLECTIVE_SIZE) -> None:
        if sum(self.counts.values()) != total:
            raise SimulationError(f"state counts {self.counts} do not sum to {total}")
        if sum(self.favoring.values()) != self.counts["F"]:
            raise SimulationError("per-target favoring counts do not sum to the F count")


def quorum_threshold(total: int = COLLECTIVE_SIZE) -> int:
    return math.ceil(QUORUM_FRACTION * total)


def execute_threshold(total: int = COLLECTIVE_SIZE) -> int:
    return math.ceil(EXECUTE_FRACTION * total)


def detect_quorum(snapshot: SupportSnapshot, total: int = COLLECTIVE_SIZE) -> int | None:
    """Return the target whose favoring support reaches the quorum threshold.

    Ties break toward the lowest target id so detection is deterministic.
    Abandoned targets report zero support and can never trigger a quorum.
    """
    threshold = quorum_threshold(total)
    best: int | None = None
    for target_id, n in snapshot.reported_favoring.items():
        if n >= threshold and (best is None or target_id < best):
            best = target_id
    return best


def dist(ax: float, ay: float, bx: float, by: float) -> float:
    return math.hypot(ax - bx, ay - by)


def segment_point_distance(
    x0: float, y0: float, x1: float, y1: float, px: float, py: float
) -> tuple[float, float]:
    """Distance from point to segment and the parameter s in [0,1] of the closest approach."""
    dx = x1 - x0
    dy = y1 - y0
    seg2 = dx * dx + dy * dy
    if seg2 <= 0.0:
        return (math.hypot(px - x0, py - y0), 0.0)
    s = ((px - x0) * dx + (py - y0) * dy) / seg2
    s = 0.0 if s < 0.0 else (1.0 if s > 1.0 else s)
    cx = x0 + s * dx
    cy = y0 + s * dy
    return (math.hypot(px - cx, py - cy), s)
