"""Situational-awareness probes: scheduling, question generation, ground
truth, and grading.

Probes start 50 seconds into a component and repeat every minute, six per
component. A full trial (easy + hard components) asks exactly twelve
questions split 5/4/3 over the perception (SA_1), comprehension (SA_2),
and projection (SA_3) levels. The question bank holds the three published
exemplar templates plus synthesized companions; ground truths are computed
from the live simulation state, which is what lets a headless respondent
stand in for the human experimenters' hand grading.
"""

from __future__ import annotations

import random
from dataclasses import dataclass

from .core import COLLECTIVE_SIZE, ROMAN_IDS
from .engine import Simulation

PROBE_START_S = 50.0
PROBE_INTERVAL_S = 60.0
PROBES_PER_COMPONENT = 6
TREND_WINDOW_S = 30          # lookback for "will support decrease" truth

LEVELS = ("SA_1", "SA_2", "SA_3")


class ProbeSkip(Exception):
    """No visible entity satisfies the template right now."""


class StaleProbeError(Exception):
    """The question's entity vanished between asking and grading."""


def schedule_probes(trial_length_s: float) -> list[float]:
    """Probe ask times: 50 s, then one-minute increments, capped at six."""
    times = []
    t = PROBE_START_S
    while t <= trial_length_s and len(times) < PROBES_PER_COMPONENT:
        times.append(t)
        t += PROBE_INTERVAL_S
    return times


def component_level_plans(seed: int) -> tuple[list[str], list[str]]:
    """Split the 5/4/3 trial quota into two shuffled 6-probe components."""
    rng = random.Random(f"probeplan:{seed}")
    splits = [
        (["SA_1"] * 3 + ["SA_2"] * 2 + ["SA_3"] * 1, ["SA_1"] * 2 + ["SA_2"] * 2 + ["SA_3"] * 2),
        (["SA_1"] * 2 + ["SA_2"] * 2 + ["SA_3"] * 2, ["SA_1"] * 3 + ["SA_2"] * 2 + ["SA_3"] * 1),
        (["SA_1"] * 3 + ["SA_2"] * 1 + ["SA_3"] * 2, ["SA_1"] * 2 + ["SA_2"] * 3 + ["SA_3"] * 1),
    ]
    first, second = splits[rng.randrange(len(splits))]
    first = list(first)
    second = list(second)
    rng.shuffle(first)
    rng.shuffle(second)
    return first, second


@dataclass
class ProbeQuestion:
    probe_id: int
    level: str
    template_id: str
    interest: list[str]          # entity tags: "target:3" / "collective:II"
    text: str
    asked_at: float

    def interest_target(self) -> int | None:
        for tag in self.interest:
            kind, _, value = tag.partition(":")
            if kind == "target":
                return int(value)
        return None

    def interest_collective(self) -> str | None:
        for tag in self.interest:
            kind, _, value = tag.partition(":")
            if kind == "collective":
                return value
        return None


@dataclass
class Answer:
    """Structured probe answer: a set of collectives, one collective, or a bool."""

    kind: str                    # "set" | "choice" | "bool"
    value: frozenset[str] | str | bool

    def encode(self) -> str:
        if self.kind == "set":
            return ",".join(sorted(self.value)) if self.value else "none"
        if self.kind == "bool":
            return "yes" if self.value else "no"
        return str(self.value)

    @classmethod
    def decode(cls, kind: str, text: str) -> "Answer":
        if kind == "set":
            items = frozenset(x for x in text.split(",") if x and x != "none")
            return cls("set", items)
        if kind == "bool":
            return cls("bool", text.strip().lower() in ("yes", "true", "1"))
        return cls("choice", text.strip())


def _visible_targets(sim: Simulation) -> list[int]:
    return sorted(t.id for t in sim.targets.values() if t.visible)


def _supported_targets(sim: Simulation) -> list[int]:
    out = set()
    for coll in sim.collectives:
        for tid in coll.favor:
            if sim.targets[tid].visible and sim.reported_support(coll.index, tid) > 0:
                out.add(tid)
        if coll.committed_target is not None and sim.targets[coll.committed_target].visible:
            out.add(coll.committed_target)
    return sorted(out)


def generate_question(sim: Simulation, level: str, rng: random.Random, probe_id: int) -> ProbeQuestion:
    """Instantiate a question for `level` referencing only visible entities."""
    visible = _visible_targets(sim)
    if not visible:
        raise ProbeSkip("no visible targets to ask about")
    supported = _supported_targets(sim) or visible
    if level == "SA_1":
        template, pool = rng.choice(
            [("investigating", supported), ("in_range", visible)]
        )
        tid = pool[rng.randrange(len(pool))]
        if template == "investigating":
            text = f"What collectives are investigating Target {tid}?"
        else:
            text = f"What collectives have Target {tid} within their search range?"
        return ProbeQuestion(probe_id, level, template, [f"target:{tid}"], text, sim.t)
    if level == "SA_2":
        tid = supported[rng.randrange(len(supported))]
        return ProbeQuestion(
            probe_id,
            level,
            "majority",
            [f"target:{tid}"],
            f"Which collective has achieved a majority support for Target {tid}?",
            sim.t,
        )
    if level == "SA_3":
        tid = supported[rng.randrange(len(supported))]
        return ProbeQuestion(
            probe_id,
            level,
            "decrease",
            [f"target:{tid}"],
            f"Will support for Target {tid} decrease?",
            sim.t,
        )
    raise ValueError(f"unknown SA level {level!r}")


def ground_truth_answer(sim: Simulation, question: ProbeQuestion) -> Answer:
    """Compute the correct answer from the current simulation state."""
    tid = question.interest_target()
    if tid is None or tid not in sim.targets:
        raise StaleProbeError(f"question {question.probe_id} lost its target")
    target = sim.targets[tid]
    if question.template_id != "decrease" and not target.visible:
        raise StaleProbeError(f"target {tid} is no longer visible")

    if question.template_id == "investigating":
        names = frozenset(
            coll.roman for coll in sim.collectives if sim.reported_support(coll.index, tid) > 0
        )
        return Answer("set", names)
    if question.template_id == "in_range":
        from .core import SEARCH_RADIUS_M, dist

        names = frozenset(
            coll.roman
            for coll in sim.collectives
            if dist(target.x, target.y, coll.hub_x, coll.hub_y) <= SEARCH_RADIUS_M
        )
        return Answer("set", names)
    if question.template_id == "majority":
        for coll in sim.collectives:
            if sim.reported_support(coll.index, tid) >= COLLECTIVE_SIZE // 2:
                return Answer("choice", coll.roman)
        return Answer("choice", "none")
    if question.template_id == "decrease":
        # True when any collective abandoned the target, when it has been
        # occupied away, or when total support trended down over the last
        # 30 seconds.
        if any(tid in coll.ignored for coll in sim.collectives):
            return Answer("bool", True)
        if target.occupied_by is not None:
            return Answer("bool", True)
        hist = sim.support_history
        if hist:
            now_s, now_map = hist[-1]
            past_map = None
            for sec, totals in hist:
                if sec <= now_s - TREND_WINDOW_S:
                    past_map = totals
                else:
                    break
            if past_map is not None:
                return Answer("bool", now_map.get(tid, 0) < past_map.get(tid, 0))
        return Answer("bool", False)
    raise ValueError(f"unknown template {question.template_id!r}")


def grade_answer(question: ProbeQuestion, truth: Answer, response: Answer) -> bool:
    """Set equality for SA_1, exact match for SA_2, boolean match for SA_3."""
    if truth.kind != response.kind:
        raise ValueError(f"answer kinds differ: {truth.kind} vs {response.kind}")
    return truth.value == response.value


class Respondent:
    """Automated probe answering for headless runs.

    The perfect policy replays the ground truth; the noisy one corrupts a
    fraction of answers so pipelines can exercise wrong-answer grading.
    """

    def __init__(self, kind: str = "perfect", seed: int = 0, error_rate: float = 0.25):
        if kind not in ("perfect", "noisy"):
            raise ValueError(f"unknown respondent kind {kind!r}")
        self.kind = kind
        self.error_rate = error_rate
        self.rng = random.Random(f"respondent:{seed}")

    def answer(self, question: ProbeQuestion, truth: Answer) -> Answer:
        if self.kind == "perfect" or self.rng.random() >= self.error_rate:
            return Answer(truth.kind, truth.value)
        if truth.kind == "bool":
            return Answer("bool", not truth.value)
        if truth.kind == "choice":
            options = [r for r in ROMAN_IDS if r != truth.value] + ["none"]
            return Answer("choice", options[self.rng.randrange(len(options))])
        wrong = set(truth.value)
        flip = ROMAN_IDS[self.rng.randrange(len(ROMAN_IDS))]
        wrong.symmetric_difference_update({flip})
        return Answer("set", frozenset(wrong))
