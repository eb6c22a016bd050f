"""Operator command protocol: validation, application, assignments log.

Exactly three situations make a well-formed command illegal: targeting
outside the collective's search region, abandoning a target that has no
assessed value yet, and deciding below 30% support. Everything else either
applies cleanly or raises a lookup/protocol error (which is not an illegal
command, it is a malformed request).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from enum import Enum

from .core import (
    COLLECTIVE_SIZE,
    ROMAN_IDS,
    SEARCH_RADIUS_M,
    EntityLookupError,
    ProtocolError,
    dist,
    quorum_threshold,
)


class CommandKind(str, Enum):
    INVESTIGATE = "investigate"
    ABANDON = "abandon"
    CANCEL_ABANDON = "cancel_abandon"
    DECIDE = "decide"


class IllegalReason(str, Enum):
    OUT_OF_RANGE = "out_of_range"
    UNVALUED_TARGET = "unvalued_target"
    BELOW_QUORUM = "below_quorum"


ILLEGAL_TEXT = {
    IllegalReason.OUT_OF_RANGE: "target is outside the collective's search region",
    IllegalReason.UNVALUED_TARGET: "target has no assessed value yet",
    IllegalReason.BELOW_QUORUM: "less than 30% of the collective supports the target",
}

INVESTIGATE_CONVERSIONS = 10  # 5% of a 200-agent collective acknowledges each investigate


@dataclass
class Command:
    kind: CommandKind
    collective_id: str            # roman numeral I-IV
    target_id: int
    issued_at: float              # seconds, session clock
    cmd_id: int = 0

    @property
    def collective_index(self) -> int:
        try:
            return ROMAN_IDS.index(self.collective_id)
        except ValueError:
            raise EntityLookupError(f"unknown collective {self.collective_id!r}") from None


@dataclass
class Assignment:
    command: Command
    status: str = "active"        # active | complete
    ack_count: int = 0            # investigate only

    @property
    def active(self) -> bool:
        return self.status == "active"


@dataclass
class SystemMessage:
    kind: str                     # "illegal" | "info"
    text: str
    at: float
    reason: IllegalReason | None = None


_RECEPTIVE_PHASES = ("deliberating", "committed")


def validate_command(cmd: Command, sim) -> IllegalReason | None:
    """Return None when legal, else the reason the command is illegal.

    Raises EntityLookupError for ids the operator cannot see (undiscovered
    or occupied targets, unknown collectives) and ProtocolError when the
    collective is not currently accepting commands (executing/relocating/
    idle): those are malformed requests, not illegal commands.
    """
    coll = sim.collectives[cmd.collective_index]
    target = sim.targets.get(cmd.target_id)
    if target is None:
        raise EntityLookupError(f"unknown target {cmd.target_id}")
    if cmd.kind is CommandKind.CANCEL_ABANDON:
        return None  # legality is existence of the assignment, checked on apply
    if not target.visible:
        raise EntityLookupError(f"target {cmd.target_id} is not visible")
    if coll.phase.value not in _RECEPTIVE_PHASES:
        raise ProtocolError(
            f"collective {cmd.collective_id} is {coll.phase.value} and not accepting commands"
        )
    if dist(target.x, target.y, coll.hub_x, coll.hub_y) > SEARCH_RADIUS_M:
        return IllegalReason.OUT_OF_RANGE
    if cmd.kind is CommandKind.ABANDON and not target.assessed:
        return IllegalReason.UNVALUED_TARGET
    if cmd.kind is CommandKind.DECIDE:
        if sim.reported_support(cmd.collective_index, cmd.target_id) < quorum_threshold(COLLECTIVE_SIZE):
            return IllegalReason.BELOW_QUORUM
    return None


class CommandProcessor:
    """Maintains the collective-assignments log and applies legal commands.

    Invoked only from the simulation tick loop; application is a pure
    function of (state, command) with no hidden clock reads.
    """

    def __init__(self, sim):
        self.sim = sim
        self.assignments: list[Assignment] = []
        self.messages: list[SystemMessage] = []
        self._ids = itertools.count(1)

    # -- queries ---------------------------------------------------------

    def assignments_for(self, collective_id: str) -> list[Assignment]:
        return [a for a in self.assignments if a.command.collective_id == collective_id]

    def active_abandon(self, collective_id: str, target_id: int) -> Assignment | None:
        for a in self.assignments:
            if (
                a.active
                and a.command.kind is CommandKind.ABANDON
                and a.command.collective_id == collective_id
                and a.command.target_id == target_id
            ):
                return a
        return None

    # -- application -----------------------------------------------------

    def handle(self, cmd: Command) -> tuple[IllegalReason | None, SystemMessage | None]:
        """Validate and apply one command; returns (reason, system message).

        Legal commands mutate the simulation and add/remove assignments;
        illegal ones leave the state untouched and produce exactly one
        illegal system message.
        """
        if cmd.cmd_id == 0:
            cmd.cmd_id = next(self._ids)
        reason = validate_command(cmd, self.sim)
        if reason is not None:
            msg = SystemMessage(
                kind="illegal",
                text=f"{cmd.kind.value} {cmd.collective_id}->target {cmd.target_id}: "
                + ILLEGAL_TEXT[reason],
                at=self.sim.t,
                reason=reason,
            )
            self.messages.append(msg)
            return reason, msg
        applier = {
            CommandKind.INVESTIGATE: self._apply_investigate,
            CommandKind.ABANDON: self._apply_abandon,
            CommandKind.CANCEL_ABANDON: self._apply_cancel_abandon,
            CommandKind.DECIDE: self._apply_decide,
        }[cmd.kind]
        applier(cmd)
        return None, None

    def _apply_investigate(self, cmd: Command) -> None:
        assignment = Assignment(command=cmd)
        self.assignments.append(assignment)
        self.sim.start_investigate(cmd.collective_index, cmd.target_id, assignment)

    def _apply_abandon(self, cmd: Command) -> None:
        # Re-issuing abandon for an already-ignored pair is legal but inert:
        # the original assignment keeps representing the standing order.
        if self.active_abandon(cmd.collective_id, cmd.target_id) is None:
            self.assignments.append(Assignment(command=cmd))
        self.sim.apply_abandon(cmd.collective_index, cmd.target_id)

    def _apply_cancel_abandon(self, cmd: Command) -> None:
        assignment = self.active_abandon(cmd.collective_id, cmd.target_id)
        if assignment is None:
            raise EntityLookupError(
                f"no active abandon assignment for {cmd.collective_id}/target {cmd.target_id}"
            )
        self.assignments.remove(assignment)
        self.sim.cancel_abandon(cmd.collective_index, cmd.target_id)

    def _apply_decide(self, cmd: Command) -> None:
        self.sim.apply_decide(cmd.collective_index, cmd.target_id)

    # -- hooks driven by the engine ---------------------------------------

    def try_ack_investigate(self, collective_index: int) -> Assignment | None:
        """First active investigate assignment that can absorb one more ack."""
        roman = ROMAN_IDS[collective_index]
        for a in self.assignments:
            if (
                a.active
                and a.command.kind is CommandKind.INVESTIGATE
                and a.command.collective_id == roman
                and a.ack_count < INVESTIGATE_CONVERSIONS
            ):
                target = self.sim.targets[a.command.target_id]
                coll = self.sim.collectives[collective_index]
                if target.occupied_by is not None or a.command.target_id in coll.ignored:
                    continue  # dormant until the target is available again
                return a
        return None

    def record_ack(self, assignment: Assignment) -> bool:
        """Count one acknowledgment; returns True when the assignment completes."""
        assignment.ack_count += 1
        if assignment.ack_count >= INVESTIGATE_CONVERSIONS:
            assignment.status = "complete"
            return True
        return False

    def purge(self, collective_id: str) -> int:
        """Drop every assignment for a collective after it completes a decision."""
        before = len(self.assignments)
        self.assignments = [a for a in self.assignments if a.command.collective_id != collective_id]
        return before - len(self.assignments)
