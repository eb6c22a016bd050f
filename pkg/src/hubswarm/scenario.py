"""Seeded generation of trial components: hub placement, targets, values.

A component is one ~10 minute decision round with 4 hubs and 16 targets in
a 1414 m x 1414 m world (~2 km^2). Easy components put each hub's
high-valued targets close to the hub; hard components push them out to the
350-500 m band while keeping low-valued decoys near. Every generated
layout guarantees a unique best value per hub region and at least one
target shared between two hub regions.
"""

from __future__ import annotations

import hashlib
import math
import random
from dataclasses import dataclass, field

import yaml

from .core import (
    N_COLLECTIVES,
    N_TARGETS,
    SEARCH_RADIUS_M,
    VALUE_MAX,
    VALUE_MIN,
    ConfigurationError,
    dist,
)

WORLD_W = 1414.0
WORLD_H = 1414.0

EASY_BEST_BAND = (130.0, 250.0)
HARD_BEST_BAND = (350.0, 480.0)

DURATION_LIMIT_S = 600.0
DECISION_CAP = 8
SOFT_CAP = 6

_MAX_ATTEMPTS = 200


class GenerationError(ConfigurationError):
    """Placement failed after bounded retries; re-seed and try again."""


class EmptyRangeError(ConfigurationError):
    """No unoccupied target in range of the queried hub position."""


@dataclass
class TargetSpec:
    id: int
    x: float
    y: float
    value: int


@dataclass
class TrialComponentConfig:
    difficulty: str                      # "easy" | "hard"
    seed: int
    hubs: list[tuple[float, float]]
    targets: list[TargetSpec]
    duration_limit_s: float = DURATION_LIMIT_S
    decision_cap: int = DECISION_CAP
    soft_cap: int = SOFT_CAP
    world_w: float = WORLD_W
    world_h: float = WORLD_H
    overlap_pairs: list[tuple[int, int, int]] = field(default_factory=list)  # (hub_a, hub_b, target)

    def validate(self) -> None:
        if len(self.hubs) != N_COLLECTIVES:
            raise ConfigurationError(f"expected {N_COLLECTIVES} hubs, got {len(self.hubs)}")
        if len(self.targets) != N_TARGETS:
            raise ConfigurationError(f"expected {N_TARGETS} targets, got {len(self.targets)}")
        for t in self.targets:
            if not (VALUE_MIN <= t.value <= VALUE_MAX):
                raise ConfigurationError(f"target {t.id} value {t.value} outside [{VALUE_MIN}, {VALUE_MAX}]")
            if not (0 <= t.x <= self.world_w and 0 <= t.y <= self.world_h):
                raise ConfigurationError(f"target {t.id} outside world bounds")

    def region_targets(self, hub_index: int) -> list[TargetSpec]:
        hx, hy = self.hubs[hub_index]
        return [t for t in self.targets if dist(t.x, t.y, hx, hy) <= SEARCH_RADIUS_M]

    def to_dict(self) -> dict:
        return {
            "difficulty": self.difficulty,
            "seed": self.seed,
            "duration_limit_s": self.duration_limit_s,
            "decision_cap": self.decision_cap,
            "soft_cap": self.soft_cap,
            "world": [self.world_w, self.world_h],
            "hubs": [[round(x, 3), round(y, 3)] for x, y in self.hubs],
            "targets": [
                {"id": t.id, "x": round(t.x, 3), "y": round(t.y, 3), "value": t.value}
                for t in self.targets
            ],
        }

    def config_hash(self) -> str:
        blob = yaml.safe_dump(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    def save(self, path: str) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("# trial component configuration\n")
            yaml.safe_dump(self.to_dict(), fh, sort_keys=False)

    @classmethod
    def load(cls, path: str) -> "TrialComponentConfig":
        with open(path, encoding="utf-8") as fh:
            data = yaml.safe_load(fh)
        cfg = cls(
            difficulty=data["difficulty"],
            seed=int(data["seed"]),
            hubs=[tuple(map(float, h)) for h in data["hubs"]],
            targets=[
                TargetSpec(id=int(t["id"]), x=float(t["x"]), y=float(t["y"]), value=int(t["value"]))
                for t in data["targets"]
            ],
            duration_limit_s=float(data.get("duration_limit_s", DURATION_LIMIT_S)),
            decision_cap=int(data.get("decision_cap", DECISION_CAP)),
            soft_cap=int(data.get("soft_cap", SOFT_CAP)),
            world_w=float(data.get("world", [WORLD_W, WORLD_H])[0]),
            world_h=float(data.get("world", [WORLD_W, WORLD_H])[1]),
        )
        cfg.validate()
        return cfg


def _hub_positions(rng: random.Random) -> list[tuple[float, float]]:
    """Four hubs near the quarter-points, jittered, in roman-id order."""
    quarter = WORLD_W / 4.0
    nominal = [
        (quarter, quarter),
        (3 * quarter, quarter),
        (quarter, 3 * quarter),
        (3 * quarter, 3 * quarter),
    ]
    return [(x + rng.uniform(-60.0, 60.0), y + rng.uniform(-60.0, 60.0)) for x, y in nominal]


def _place_at_distance(
    rng: random.Random,
    hub: tuple[float, float],
    others: list[tuple[float, float]],
    d_band: tuple[float, float],
) -> tuple[float, float] | None:
    """Sample a point in the distance band around `hub`, inside the world
    and outside every other hub's search region (so a target never perturbs
    a neighboring region's value ordering)."""
    for _ in range(150):
        r = rng.uniform(*d_band)
        theta = rng.uniform(0.0, 2.0 * math.pi)
        x = hub[0] + r * math.cos(theta)
        y = hub[1] + r * math.sin(theta)
        if not (0.0 <= x <= WORLD_W and 0.0 <= y <= WORLD_H):
            continue
        if any(dist(x, y, ox, oy) <= SEARCH_RADIUS_M + 20.0 for ox, oy in others):
            continue
        return (x, y)
    return None


def _attempt(rng: random.Random, difficulty: str) -> TrialComponentConfig | None:
    hubs = _hub_positions(rng)
    best_band = EASY_BEST_BAND if difficulty == "easy" else HARD_BEST_BAND
    decoy_band = (130.0, 460.0) if difficulty == "easy" else (130.0, 300.0)

    # Value ranks 0..15, descending. Ranks 0-3 are the per-hub bests and
    # ranks 4-7 the per-hub runners-up; both go in the difficulty band so a
    # region's top value quartile always respects it. Ranks 8-13 are decoys
    # and the two lowest (14, 15) sit on shared midline positions where two
    # search regions overlap.
    values = sorted((rng.randint(VALUE_MIN, VALUE_MAX) for _ in range(N_TARGETS)), reverse=True)
    positions: list[tuple[float, float] | None] = [None] * N_TARGETS

    hub_order = list(range(N_COLLECTIVES))
    rng.shuffle(hub_order)
    for tier in (0, 1):  # best, runner-up
        for slot, hub_idx in enumerate(hub_order):
            rank = tier * N_COLLECTIVES + slot
            others = [h for i, h in enumerate(hubs) if i != hub_idx]
            pos = _place_at_distance(rng, hubs[hub_idx], others, best_band)
            if pos is None:
                return None
            positions[rank] = pos

    decoy_hubs = [0, 1, 2, 3, 0, 1]
    rng.shuffle(decoy_hubs)
    for slot, hub_idx in enumerate(decoy_hubs):
        rank = 8 + slot
        others = [h for i, h in enumerate(hubs) if i != hub_idx]
        pos = _place_at_distance(rng, hubs[hub_idx], others, decoy_band)
        if pos is None:
            return None
        positions[rank] = pos

    overlap_hub_pairs = [(0, 1), (2, 3)]
    overlap_ranks: list[int] = []
    for k, (a, b) in enumerate(overlap_hub_pairs):
        rank = N_TARGETS - 1 - k
        mx = (hubs[a][0] + hubs[b][0]) / 2.0
        my = (hubs[a][1] + hubs[b][1]) / 2.0
        placed = False
        for _ in range(150):
            x = mx + rng.uniform(-60.0, 60.0)
            y = my + rng.uniform(-60.0, 60.0)
            if (
                0.0 <= x <= WORLD_W
                and 0.0 <= y <= WORLD_H
                and dist(x, y, *hubs[a]) <= SEARCH_RADIUS_M - 30.0
                and dist(x, y, *hubs[b]) <= SEARCH_RADIUS_M - 30.0
            ):
                positions[rank] = (x, y)
                overlap_ranks.append(rank)
                placed = True
                break
        if not placed:
            return None

    # De-tie regional maxima: decrement the higher-id member(s) of any tie.
    for _ in range(64):
        tied = False
        for hub_idx in range(N_COLLECTIVES):
            hx, hy = hubs[hub_idx]
            in_region = [i for i in range(N_TARGETS) if dist(*positions[i], hx, hy) <= SEARCH_RADIUS_M]
            if len(in_region) < 2:
                return None
            vmax = max(values[i] for i in in_region)
            top = sorted(i for i in in_region if values[i] == vmax)
            if len(top) > 1:
                tied = True
                for i in top[1:]:
                    if values[i] <= VALUE_MIN:
                        return None
                    values[i] -= 1
        if not tied:
            break
    else:
        return None

    # Assign final ids in shuffled order so ids carry no value rank.
    id_order = list(range(N_TARGETS))
    rng.shuffle(id_order)
    targets: list[TargetSpec | None] = [None] * N_TARGETS
    rank_to_id: dict[int, int] = {}
    for tid, rank in enumerate(id_order):
        x, y = positions[rank]
        targets[tid] = TargetSpec(id=tid, x=x, y=y, value=values[rank])
        rank_to_id[rank] = tid

    cfg = TrialComponentConfig(
        difficulty=difficulty,
        seed=0,  # set by caller
        hubs=hubs,
        targets=targets,
        overlap_pairs=[
            (a, b, rank_to_id[rank]) for (a, b), rank in zip(overlap_hub_pairs, overlap_ranks)
        ],
    )
    return cfg if _check_invariants(cfg) else None


def _check_invariants(cfg: TrialComponentConfig) -> bool:
    band = EASY_BEST_BAND if cfg.difficulty == "easy" else HARD_BEST_BAND
    region_sets = []
    for hub_idx in range(N_COLLECTIVES):
        region = cfg.region_targets(hub_idx)
        if len(region) < 2:
            return False
        region_sets.append({t.id for t in region})
        vmax = max(t.value for t in region)
        if sum(1 for t in region if t.value == vmax) != 1:
            return False
        # The region's top value quartile must respect the difficulty band.
        n_top = max(1, math.ceil(len(region) / 4))
        hx, hy = cfg.hubs[hub_idx]
        for t in sorted(region, key=lambda t: (-t.value, t.id))[:n_top]:
            d = dist(t.x, t.y, hx, hy)
            if cfg.difficulty == "easy":
                if d > band[1]:
                    return False
            elif not (band[0] <= d <= SEARCH_RADIUS_M):
                return False
    return any(
        region_sets[i] & region_sets[j]
        for i in range(N_COLLECTIVES)
        for j in range(i + 1, N_COLLECTIVES)
    )


def generate_component(difficulty: str, seed: int) -> TrialComponentConfig:
    """Generate a reproducible trial component for the given difficulty."""
    if difficulty not in ("easy", "hard"):
        raise ConfigurationError(f"unknown difficulty {difficulty!r}")
    rng = random.Random(f"scenario:{difficulty}:{seed}")
    for _ in range(_MAX_ATTEMPTS):
        cfg = _attempt(rng, difficulty)
        if cfg is not None:
            cfg.seed = seed
            cfg.validate()
            return cfg
    raise GenerationError(f"no valid {difficulty} layout after {_MAX_ATTEMPTS} attempts (seed {seed})")


def ground_truth_best(
    cfg: TrialComponentConfig,
    hub_position: tuple[float, float],
    occupied: frozenset[int] | set[int] = frozenset(),
) -> int:
    """Highest-valued unoccupied target within search range of `hub_position`.

    Ties break toward the lowest id (the generator keeps regional maxima
    unique, so ties only arise after occupation reshapes the field).
    """
    hx, hy = hub_position
    best: TargetSpec | None = None
    for t in cfg.targets:
        if t.id in occupied or dist(t.x, t.y, hx, hy) > SEARCH_RADIUS_M:
            continue
        if best is None or t.value > best.value or (t.value == best.value and t.id < best.id):
            best = t
    if best is None:
        raise EmptyRangeError(f"no unoccupied target within range of {hub_position}")
    return best.id
