"""Append-only structured event log: the single source for replay, metrics,
wire traffic, and persistence.

On-disk format (`.hclog`): one UTF-8 record per line. The first line is a
header carrying the schema version, seeds, model, and a config hash; every
following line is `seq=<n> t=<seconds> kind=<kind> key=value ...` with
payload keys sorted and values percent-escaped. Lines round-trip exactly:
serialize(parse(line)) == line.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field
from urllib.parse import quote, unquote

SCHEMA_VERSION = "1"

# Record kinds.
TICK_SNAPSHOT = "TickSnapshot"
TARGET_DISCOVERED = "TargetDiscovered"
TARGET_ASSESSED = "TargetAssessed"
STATE_TRANSITION = "StateTransition"
QUORUM_REACHED = "QuorumReached"
EXECUTION_STARTED = "ExecutionStarted"
HUB_ARRIVED = "HubArrived"
MERGE_RESOLVED = "MergeResolved"
DECISION_COMPLETED = "DecisionCompleted"
COMMAND_ISSUED = "CommandIssued"
COMMAND_VERDICT = "CommandVerdict"
SYSTEM_MESSAGE = "SystemMessage"
PROBE_ASKED = "ProbeAsked"
PROBE_ANSWERED = "ProbeAnswered"
TRIAL_ENDED = "TrialEnded"

KINDS = frozenset(
    {
        TICK_SNAPSHOT,
        TARGET_DISCOVERED,
        TARGET_ASSESSED,
        STATE_TRANSITION,
        QUORUM_REACHED,
        EXECUTION_STARTED,
        HUB_ARRIVED,
        MERGE_RESOLVED,
        DECISION_COMPLETED,
        COMMAND_ISSUED,
        COMMAND_VERDICT,
        SYSTEM_MESSAGE,
        PROBE_ASKED,
        PROBE_ANSWERED,
        TRIAL_ENDED,
    }
)

# Characters that survive escaping unchanged in payload values.
_SAFE = "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789.,:;-_+()/*'"


class LogCorruptionError(Exception):
    """Out-of-order append or a malformed log line."""


class ReplayDivergenceError(Exception):
    """Replay produced a different record than the one on disk."""

    def __init__(self, seq: int, expected: str, actual: str):
        super().__init__(f"replay diverged at seq {seq}")
        self.seq = seq
        self.expected = expected
        self.actual = actual


_RESERVED_KEYS = frozenset({"seq", "t", "kind"})


@dataclass(frozen=True)
class EventRecord:
    seq: int
    t: float
    kind: str
    payload: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        bad = _RESERVED_KEYS.intersection(self.payload)
        if bad:
            raise LogCorruptionError(f"payload uses reserved key(s) {sorted(bad)}")

    def serialize(self) -> str:
        parts = [f"seq={self.seq}", f"t={self.t:.3f}", f"kind={self.kind}"]
        for key in sorted(self.payload):
            parts.append(f"{key}={quote(str(self.payload[key]), safe=_SAFE)}")
        return " ".join(parts)

    @classmethod
    def parse(cls, line: str) -> "EventRecord":
        fields: dict[str, str] = {}
        for token in line.strip().split(" "):
            if not token:
                continue
            key, sep, value = token.partition("=")
            if not sep:
                raise LogCorruptionError(f"malformed token {token!r}")
            fields[key] = unquote(value)
        try:
            seq = int(fields.pop("seq"))
            t = float(fields.pop("t"))
            kind = fields.pop("kind")
        except KeyError as exc:
            raise LogCorruptionError(f"record missing field {exc}") from exc
        if kind not in KINDS:
            raise LogCorruptionError(f"unknown record kind {kind!r}")
        return cls(seq=seq, t=t, kind=kind, payload=fields)


@dataclass
class LogHeader:
    """First line of every log: everything replay needs to re-run the trial."""

    seed: int
    model: str
    difficulty: str
    scenario_seed: int
    config_hash: str
    params: dict
    component_index: int = 0
    probe_levels: str = ""          # comma-joined SA levels actually scheduled
    snapshots: bool = True
    duration_limit_s: float = 600.0
    decision_cap: int = 8
    soft_cap: int = 6
    schema: str = SCHEMA_VERSION

    def serialize(self) -> str:
        import json

        fields = {
            "schema": self.schema,
            "seed": self.seed,
            "model": self.model,
            "difficulty": self.difficulty,
            "scenario_seed": self.scenario_seed,
            "config_hash": self.config_hash,
            "component_index": self.component_index,
            "probe_levels": self.probe_levels,
            "snapshots": int(self.snapshots),
            "duration_limit_s": self.duration_limit_s,
            "decision_cap": self.decision_cap,
            "soft_cap": self.soft_cap,
            "params": json.dumps(self.params, sort_keys=True),
        }
        return "hclog " + " ".join(f"{k}={quote(str(v), safe=_SAFE)}" for k, v in fields.items())

    @classmethod
    def parse(cls, line: str) -> "LogHeader":
        import json

        if not line.startswith("hclog "):
            raise LogCorruptionError("missing hclog header line")
        fields: dict[str, str] = {}
        for token in line.strip().split(" ")[1:]:
            key, sep, value = token.partition("=")
            if not sep:
                raise LogCorruptionError(f"malformed header token {token!r}")
            fields[key] = unquote(value)
        if fields.get("schema") != SCHEMA_VERSION:
            raise LogCorruptionError(f"unsupported schema {fields.get('schema')!r}")
        return cls(
            seed=int(fields["seed"]),
            model=fields["model"],
            difficulty=fields["difficulty"],
            scenario_seed=int(fields["scenario_seed"]),
            config_hash=fields["config_hash"],
            params=json.loads(fields["params"]),
            component_index=int(fields.get("component_index", 0)),
            probe_levels=fields.get("probe_levels", ""),
            snapshots=bool(int(fields.get("snapshots", "1"))),
            duration_limit_s=float(fields.get("duration_limit_s", 600.0)),
            decision_cap=int(fields.get("decision_cap", 8)),
            soft_cap=int(fields.get("soft_cap", 6)),
        )


class EventLog:
    """In-memory append-only log with ordering checks."""

    def __init__(self, header: LogHeader | None = None):
        self.header = header
        self.records: list[EventRecord] = []

    def append(self, record: EventRecord) -> None:
        if self.records:
            last = self.records[-1]
            if record.seq != last.seq + 1:
                raise LogCorruptionError(f"seq jump: {last.seq} -> {record.seq}")
            if record.t < last.t:
                raise LogCorruptionError(f"time regression at seq {record.seq}: {last.t} -> {record.t}")
        elif record.seq != 0:
            raise LogCorruptionError(f"first record must have seq 0, got {record.seq}")
        self.records.append(record)

    def __iter__(self):
        return iter(self.records)

    def __len__(self) -> int:
        return len(self.records)

    def of_kind(self, kind: str) -> list[EventRecord]:
        return [r for r in self.records if r.kind == kind]

    def dump(self, fh: io.TextIOBase) -> None:
        if self.header is not None:
            fh.write(self.header.serialize() + "\n")
        for record in self.records:
            fh.write(record.serialize() + "\n")

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            self.dump(fh)

    @classmethod
    def load(cls, path) -> "EventLog":
        with open(path, encoding="utf-8") as fh:
            lines = fh.read().splitlines()
        if not lines:
            raise LogCorruptionError("empty log file")
        log = cls(header=LogHeader.parse(lines[0]))
        for line in lines[1:]:
            if line.strip():
                log.append(EventRecord.parse(line))
        return log
