"""Pure computation of the quantitative measures: interface clutter
percentages, SA probe accuracy, Euclidean interaction distances, decision
time, selection success, selected target value, abandon excess, and
commit-to-decide time.

Clutter uses fixed per-item pixel areas on a 1920x1080 display. The local
radius is 254 px: the display scale works out to roughly 1.97 m per pixel,
so a 500 m interest radius covers ~254 px. Local clutter may legitimately
exceed 100% because pop-up windows are counted at full area even when they
would overlap other items.
"""

from __future__ import annotations

import math
import statistics
from dataclasses import dataclass, field

from .events import (
    COMMAND_ISSUED,
    COMMAND_VERDICT,
    DECISION_COMPLETED,
    EventRecord,
    PROBE_ANSWERED,
    QUORUM_REACHED,
)


class MetricDomainError(ValueError):
    """Inputs outside a metric's domain (negative counts, wrong cardinality)."""


class MetricLookupError(KeyError):
    """The requested decision/probe does not exist in the log."""


# ---------------------------------------------------------------------------
# Clutter
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PixelAreaConstants:
    hub_area: float = 2464.0
    highlighted_target: float = 2350.0
    plain_target: float = 1720.0
    agent: float = 64.0
    target_info_window: float = 32922.0
    collective_info_window: float = 25740.0
    static_interface: float = 493414.0           # ICA: program bars, request + monitor areas
    all_hubs: float = 9856.0                     # GHA: the four always-visible hubs
    all_agents: float = 51200.0                  # GAICE: 800 entities, IA view only
    display_area: float = 2073600.0              # 1920 x 1080
    local_radius_px: float = 254.0

    def verify(self) -> None:
        if self.all_hubs != 4 * self.hub_area:
            raise MetricDomainError("all-hub area must equal 4 hub areas")
        if self.all_agents != 800 * self.agent:
            raise MetricDomainError("all-agent area must equal 800 agent areas")
        if self.display_area != 1920 * 1080:
            raise MetricDomainError("display area must match 1920x1080")

    @property
    def local_denominator(self) -> float:
        return math.pi * self.local_radius_px**2


@dataclass(frozen=True)
class ClutterItemCounts:
    """Item counts inside one 500 m interest radius (local) or on the whole
    display (global). Agent counts are ignored for the abstract collective
    view, which never draws individual entities."""

    visualization: str = "ia"                    # "ia" | "collective"
    hubs: int = 0
    highlighted_targets: int = 0
    plain_targets: int = 0
    agents: int = 0
    target_windows: int = 0
    collective_windows: int = 0

    def verify(self) -> None:
        for name in ("hubs", "highlighted_targets", "plain_targets", "agents",
                     "target_windows", "collective_windows"):
            if getattr(self, name) < 0:
                raise MetricDomainError(f"negative count for {name}")
        if self.visualization not in ("ia", "collective"):
            raise MetricDomainError(f"unknown visualization {self.visualization!r}")


def local_clutter(
    counts: ClutterItemCounts | list[ClutterItemCounts],
    constants: PixelAreaConstants = PixelAreaConstants(),
) -> float:
    """Percentage of one or more 500 m interest discs obstructed by items.

    Multi-interest probes pass a list; per-interest percentages sum. The
    result is unclamped and can exceed 100%.
    """
    if isinstance(counts, ClutterItemCounts):
        counts = [counts]
    total = 0.0
    for c in counts:
        c.verify()
        area = (
            c.hubs * constants.hub_area
            + c.highlighted_targets * constants.highlighted_target
            + c.plain_targets * constants.plain_target
            + (c.agents * constants.agent if c.visualization == "ia" else 0.0)
            + c.target_windows * constants.target_info_window
            + c.collective_windows * constants.collective_info_window
        )
        total += area / constants.local_denominator * 100.0
    return total


def global_clutter(
    counts: ClutterItemCounts,
    constants: PixelAreaConstants = PixelAreaConstants(),
) -> float:
    """Percentage of the whole display obstructed by interface items.

    The static interface chrome and the four hubs are always present; the
    800 individual entities count only for the IA view.
    """
    counts.verify()
    area = (
        constants.static_interface
        + constants.all_hubs
        + counts.highlighted_targets * constants.highlighted_target
        + counts.plain_targets * constants.plain_target
        + (constants.all_agents if counts.visualization == "ia" else 0.0)
        + counts.target_windows * constants.target_info_window
        + counts.collective_windows * constants.collective_info_window
    )
    return area / constants.display_area * 100.0


# ---------------------------------------------------------------------------
# SA probe accuracy
# ---------------------------------------------------------------------------

SA_LEVELS = ("SA_1", "SA_2", "SA_3")
SA_QUOTA = {"SA_1": 5, "SA_2": 4, "SA_3": 3}   # per full 12-probe trial
SA_TOTAL = 12


def sa_probe_accuracy(grades: list[tuple[str, bool]]) -> dict[str, float]:
    """Per-level and overall percentage correct for one full trial.

    Expects exactly 12 grades split 5/4/3 over the perception,
    comprehension, and projection levels.
    """
    if len(grades) != SA_TOTAL:
        raise MetricDomainError(f"expected {SA_TOTAL} grades, got {len(grades)}")
    by_level: dict[str, list[bool]] = {lvl: [] for lvl in SA_LEVELS}
    for level, correct in grades:
        if level not in by_level:
            raise MetricDomainError(f"unknown SA level {level!r}")
        by_level[level].append(bool(correct))
    for level, quota in SA_QUOTA.items():
        if len(by_level[level]) != quota:
            raise MetricDomainError(
                f"{level} needs {quota} grades, got {len(by_level[level])}"
            )
    out = {"SA_O": 100.0 * sum(c for _, c in grades) / SA_TOTAL}
    for level in SA_LEVELS:
        out[level] = 100.0 * sum(by_level[level]) / SA_QUOTA[level]
    return out


# ---------------------------------------------------------------------------
# Interaction distances
# ---------------------------------------------------------------------------

def distance_probe_to_click(
    interest: tuple[float, float], click: tuple[float, float]
) -> float:
    """Euclidean pixel distance between a probe's interest object and a click."""
    return math.hypot(interest[0] - click[0], interest[1] - click[1])


def sum_distance_between_clicks(clicks: list[tuple[float, float]]) -> float:
    """Sum of consecutive-pair distances; zero or one click sums to 0."""
    return sum(
        math.hypot(b[0] - a[0], b[1] - a[1]) for a, b in zip(clicks, clicks[1:])
    )


# ---------------------------------------------------------------------------
# Log-derived decision metrics
# ---------------------------------------------------------------------------

def _decisions(records: list[EventRecord]) -> list[EventRecord]:
    return [r for r in records if r.kind == DECISION_COMPLETED]


def decision_time(records: list[EventRecord], collective_id: str, index: int) -> float:
    """Minutes from the decision window opening to execution start.

    The window opens at component start for a collective's first decision
    and at the completion of its previous decision otherwise; the clock
    stops when execution begins (operator decide acceptance or the 50%
    autonomous threshold), not at hub arrival.
    """
    for r in _decisions(records):
        if r.payload["coll"] == collective_id and int(r.payload["index"]) == index:
            return (float(r.payload["exec_start"]) - float(r.payload["window_start"])) / 60.0
    raise MetricLookupError(f"no decision {index} for collective {collective_id}")


def decision_times(records: list[EventRecord]) -> list[float]:
    return [
        (float(r.payload["exec_start"]) - float(r.payload["window_start"])) / 60.0
        for r in _decisions(records)
    ]


def selection_success_rate(records: list[EventRecord]) -> float:
    """Percent of decisions where the collective moved to the best target.

    Merge losers count in the denominator and are never correct: they did
    not move to any target, let alone the highest valued one.
    """
    decisions = _decisions(records)
    if not decisions:
        raise MetricDomainError("no decisions in log; success rate is undefined")
    correct = sum(int(r.payload["success"]) for r in decisions)
    return 100.0 * correct / len(decisions)


def selected_target_value_stats(records: list[EventRecord]) -> dict[str, float]:
    """Descriptive statistics of the chosen targets' true values."""
    values = [
        float(r.payload["value"])
        for r in _decisions(records)
        if r.payload.get("value") not in ("", None)
    ]
    if not values:
        raise MetricDomainError("no decisions in log; value stats are undefined")
    return {
        "mean": statistics.fmean(values),
        "median": statistics.median(values),
        "min": min(values),
        "max": max(values),
        "n": float(len(values)),
    }


def abandon_excess_rate(records: list[EventRecord]) -> float:
    """Percent of abandon commands exceeding the distinct targets abandoned.

    Counts legal abandon commands against the distinct (collective, target)
    pairs they named; zero when there are no repeats. Logs with no abandon
    commands score 0.
    """
    legal_ids = {
        r.payload["cmd"]
        for r in records
        if r.kind == COMMAND_VERDICT
        and r.payload["cmd_kind"] == "abandon"
        and r.payload["verdict"] == "legal"
    }
    commands = 0
    pairs: set[tuple[str, str]] = set()
    for r in records:
        if r.kind == COMMAND_ISSUED and r.payload["cmd_kind"] == "abandon" and r.payload["cmd"] in legal_ids:
            commands += 1
            pairs.add((r.payload["coll"], r.payload["target"]))
    if commands == 0:
        return 0.0
    return 100.0 * (commands - len(pairs)) / commands


def commit_to_decide_time(
    records: list[EventRecord], collective_id: str, index: int
) -> float | None:
    """Minutes between quorum commitment and the operator's decide command.

    Returns None when the decision never saw a decide (autonomous 50%
    execution produces no sample).
    """
    decision = None
    for r in _decisions(records):
        if r.payload["coll"] == collective_id and int(r.payload["index"]) == index:
            decision = r
            break
    if decision is None:
        raise MetricLookupError(f"no decision {index} for collective {collective_id}")
    if decision.payload.get("trigger") != "decide":
        return None
    window_start = float(decision.payload["window_start"])
    exec_start = float(decision.payload["exec_start"])
    committed_at = None
    for r in records:
        if (
            r.kind == QUORUM_REACHED
            and r.payload["coll"] == collective_id
            and window_start <= r.t <= exec_start
        ):
            committed_at = r.t
            break
    if committed_at is None:
        return None
    dt_min = (exec_start - committed_at) / 60.0
    if dt_min < 0:
        raise MetricDomainError("decide precedes commitment")
    return dt_min


def probe_grades(records: list[EventRecord]) -> list[tuple[str, bool]]:
    """(level, correct) pairs for every answered probe in the log."""
    return [
        (r.payload["level"], r.payload["correct"] == "1")
        for r in records
        if r.kind == PROBE_ANSWERED
    ]


# ---------------------------------------------------------------------------
# Batch aggregation
# ---------------------------------------------------------------------------

@dataclass
class Aggregate:
    values: list[float] = field(default_factory=list)

    def add(self, v: float) -> None:
        self.values.append(v)

    def summary(self) -> dict[str, float]:
        if not self.values:
            return {"n": 0.0}
        out = {
            "n": float(len(self.values)),
            "mean": statistics.fmean(self.values),
            "median": statistics.median(self.values),
            "min": min(self.values),
            "max": max(self.values),
        }
        out["sd"] = statistics.stdev(self.values) if len(self.values) > 1 else 0.0
        return out


def format_report(sections: dict[str, dict[str, float]]) -> str:
    """Machine-parseable key=value lines, one metric per line."""
    lines = []
    for section, fields in sections.items():
        for key, value in fields.items():
            if isinstance(value, float):
                lines.append(f"{section}.{key}={value:.4f}")
            else:
                lines.append(f"{section}.{key}={value}")
    return "\n".join(lines) + "\n"
