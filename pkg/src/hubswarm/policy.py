"""Scripted operator policies for desk-scale reproduction of operator-in-
the-loop runs without humans.

A policy file is a list of trigger rules, one per line:

    # fire at most once per decision window
    if support(best) >= 30% : decide best

    # fire repeatedly on a cooldown
    every 45s if t > 60 and support(best) < 10% : investigate best

Conditions test `t` (seconds into the component), `decisions` (this
collective's completed count), or `support(SEL)`; `SEL` is `best` (ground
truth best in range: the oracle-assist selector), `leader` (current
highest-support target), or `worst` (lowest-value assessed target in
range). Percentages are of the 200-agent collective. Rules are evaluated
per collective once per second and emit commands through the same
validation path an operator would use.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .commands import Command, CommandKind
from .core import COLLECTIVE_SIZE, Phase, dist, SEARCH_RADIUS_M
from .scenario import EmptyRangeError, ground_truth_best


class PolicyParseError(ValueError):
    def __init__(self, line_no: int, message: str):
        super().__init__(f"policy line {line_no}: {message}")
        self.line_no = line_no


_ACTIONS = {"investigate": CommandKind.INVESTIGATE, "abandon": CommandKind.ABANDON, "decide": CommandKind.DECIDE}
_SELECTORS = ("best", "leader", "worst")
_OPS = {
    ">=": lambda a, b: a >= b,
    "<=": lambda a, b: a <= b,
    ">": lambda a, b: a > b,
    "<": lambda a, b: a < b,
    "==": lambda a, b: a == b,
    "!=": lambda a, b: a != b,
}
_COND_RE = re.compile(r"^(t|decisions|support\((best|leader|worst)\))\s*(>=|<=|==|!=|>|<)\s*([\d.]+%?)$")
_RULE_RE = re.compile(r"^(?:every\s+([\d.]+)\s*s\s+)?if\s+(.+?)\s*:\s*(\w+)\s+(\w+)$")


@dataclass
class Condition:
    metric: str                 # "t" | "decisions" | "support"
    selector: str | None
    op: str
    value: float
    percent: bool


@dataclass
class Rule:
    conditions: list[Condition]
    action: CommandKind
    selector: str
    every_s: float | None       # None = once per decision window
    line_no: int
    last_fired: dict[int, float] = field(default_factory=dict)       # ci -> t
    fired_window: dict[int, int] = field(default_factory=dict)       # ci -> window_start tick


def parse_policy(text: str) -> list[Rule]:
    rules: list[Rule] = []
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        m = _RULE_RE.match(line)
        if not m:
            raise PolicyParseError(line_no, f"unrecognized trigger {line!r}")
        every_s, cond_text, action_word, selector = m.groups()
        if action_word not in _ACTIONS:
            raise PolicyParseError(line_no, f"unknown action {action_word!r}")
        if selector not in _SELECTORS:
            raise PolicyParseError(line_no, f"unknown selector {selector!r}")
        conditions = []
        for chunk in re.split(r"\s+and\s+", cond_text):
            cm = _COND_RE.match(chunk.strip())
            if not cm:
                raise PolicyParseError(line_no, f"bad condition {chunk.strip()!r}")
            metric_full, sel, op, value_text = cm.groups()
            percent = value_text.endswith("%")
            value = float(value_text.rstrip("%"))
            if percent:
                value = value / 100.0 * COLLECTIVE_SIZE
            metric = "support" if metric_full.startswith("support") else metric_full
            conditions.append(Condition(metric=metric, selector=sel, op=op, value=value, percent=percent))
        rules.append(
            Rule(
                conditions=conditions,
                action=_ACTIONS[action_word],
                selector=selector,
                every_s=float(every_s) if every_s else None,
                line_no=line_no,
            )
        )
    return rules


def load_policy(path) -> "ScriptedOperator":
    with open(path, encoding="utf-8") as fh:
        return ScriptedOperator(parse_policy(fh.read()))


ORACLE_ASSIST = (
    "every 40s if t > 45 and support(best) < 20% : investigate best\n"
    "if support(best) >= 30% : decide best\n"
)


class ScriptedOperator:
    """Evaluates trigger rules against live state and emits commands."""

    def __init__(self, rules: list[Rule]):
        self.rules = rules

    def _resolve(self, sim, coll, selector: str) -> int | None:
        if selector == "best":
            occupied = {t.id for t in sim.targets.values() if t.occupied_by is not None}
            try:
                return ground_truth_best(sim.config, (coll.hub_x, coll.hub_y), occupied)
            except EmptyRangeError:
                return None
        if selector == "leader":
            best_tid, best_n = None, 0
            for tid in sorted(coll.favor):
                n = sim.reported_support(coll.index, tid)
                if n > best_n:
                    best_tid, best_n = tid, n
            return best_tid
        # worst: lowest-value assessed, in-range, visible target
        worst_tid, worst_value = None, None
        for tid in sorted(sim.targets):
            target = sim.targets[tid]
            if not (target.visible and target.assessed) or tid in coll.ignored:
                continue
            if dist(target.x, target.y, coll.hub_x, coll.hub_y) > SEARCH_RADIUS_M:
                continue
            if worst_value is None or target.value < worst_value:
                worst_tid, worst_value = tid, target.value
        return worst_tid

    def poll(self, sim) -> list[Command]:
        """One evaluation pass; returns commands to enqueue this second."""
        out: list[Command] = []
        for coll in sim.collectives:
            if coll.phase not in (Phase.DELIBERATING, Phase.COMMITTED):
                continue
            for rule in self.rules:
                if rule.every_s is None:
                    if rule.fired_window.get(coll.index) == coll.window_start:
                        continue
                else:
                    last = rule.last_fired.get(coll.index)
                    if last is not None and sim.t - last < rule.every_s:
                        continue
                target_id = self._resolve(sim, coll, rule.selector)
                if target_id is None:
                    continue
                if not sim.targets[target_id].visible:
                    continue
                ok = True
                for cond in rule.conditions:
                    if cond.metric == "t":
                        lhs = sim.t
                    elif cond.metric == "decisions":
                        lhs = float(coll.decisions_made)
                    else:
                        sel_tid = (
                            target_id
                            if cond.selector == rule.selector
                            else self._resolve(sim, coll, cond.selector)
                        )
                        lhs = 0.0 if sel_tid is None else float(sim.reported_support(coll.index, sel_tid))
                    if not _OPS[cond.op](lhs, cond.value):
                        ok = False
                        break
                if not ok:
                    continue
                # Keep obviously illegal emissions out of the stream: decide
                # needs quorum-level support, abandon needs an assessed value.
                if rule.action is CommandKind.DECIDE and sim.reported_support(
                    coll.index, target_id
                ) < 0.30 * COLLECTIVE_SIZE:
                    continue
                if rule.action is CommandKind.ABANDON and (
                    not sim.targets[target_id].assessed or target_id in coll.ignored
                ):
                    continue
                if (
                    dist(
                        sim.targets[target_id].x,
                        sim.targets[target_id].y,
                        coll.hub_x,
                        coll.hub_y,
                    )
                    > SEARCH_RADIUS_M
                ):
                    continue
                out.append(
                    Command(
                        kind=rule.action,
                        collective_id=coll.roman,
                        target_id=target_id,
                        issued_at=sim.t,
                    )
                )
                rule.last_fired[coll.index] = sim.t
                rule.fired_window[coll.index] = coll.window_start
        return out
