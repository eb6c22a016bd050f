"""Headless batch execution, calibration sweeps, and report rendering.

A batch runs N seeded trials per difficulty, writes one `.hclog` per trial,
and emits an aggregate report as machine-parseable key=value lines plus
matplotlib figures rendered alongside the delimited output.
"""

from __future__ import annotations

import itertools
import statistics
from dataclasses import dataclass, field
from pathlib import Path

from . import metrics as mx
from .core import DynamicsParams, ModelKind
from .events import EventLog
from .policy import ScriptedOperator
from .probes import Respondent, component_level_plans
from .trial import TrialRunner, replay_log

# Headless baseline targets used by the calibration objective: mean decision
# minutes and mean selection success percent by difficulty.
SIM_BASELINE = {
    "decision_min": {"overall": 4.8, "easy": 4.19, "hard": 5.73},
    "success_pct": {"overall": 73.69, "easy": 77.15, "hard": 62.05},
}


@dataclass
class BatchSpec:
    model: ModelKind = ModelKind.M2_SIM
    difficulty: str = "easy"               # "easy" | "hard" | "both"
    trials: int = 50
    seed_base: int = 1000
    params: DynamicsParams = field(default_factory=DynamicsParams)
    policy: ScriptedOperator | None = None
    probes: bool = True
    respondent: str = "perfect"
    out_dir: Path | None = None
    figures: bool = True

    def validate(self) -> None:
        if self.trials < 1:
            raise ValueError("trial count must be >= 1")
        if self.model is ModelKind.M2_SIM and self.policy is not None:
            raise ValueError("the no-operator baseline cannot take an operator policy")


@dataclass
class TrialRow:
    difficulty: str
    seed: int
    decisions: int
    correct: int
    decision_minutes: list[float]
    success_pct: float
    end_reason: str
    duration_s: float
    log_path: Path | None = None


@dataclass
class BatchReport:
    spec: BatchSpec
    rows: list[TrialRow]

    def pooled_times(self, difficulty: str | None = None) -> list[float]:
        return [
            t
            for row in self.rows
            if difficulty in (None, row.difficulty)
            for t in row.decision_minutes
        ]

    def success_values(self, difficulty: str | None = None) -> list[float]:
        return [row.success_pct for row in self.rows if difficulty in (None, row.difficulty)]

    def pooled_success(self, difficulty: str | None = None) -> float:
        rows = [r for r in self.rows if difficulty in (None, r.difficulty)]
        total = sum(r.decisions for r in rows)
        if total == 0:
            raise mx.MetricDomainError("no decisions across batch")
        return 100.0 * sum(r.correct for r in rows) / total

    def sections(self) -> dict[str, dict[str, float]]:
        out: dict[str, dict[str, float]] = {}
        difficulties = sorted({r.difficulty for r in self.rows})
        scopes = ["overall"] + difficulties if len(difficulties) > 1 else difficulties
        for scope in scopes:
            d = None if scope == "overall" else scope
            agg_t = mx.Aggregate(self.pooled_times(d))
            agg_s = mx.Aggregate(self.success_values(d))
            sec = {f"decision_min_{k}": v for k, v in agg_t.summary().items()}
            sec.update({f"success_pct_{k}": v for k, v in agg_s.summary().items()})
            sec["success_pct_pooled"] = self.pooled_success(d)
            out[f"batch.{scope}"] = sec
        return out

    def text(self) -> str:
        return mx.format_report(self.sections())


def run_trial(
    difficulty: str,
    seed: int,
    model: ModelKind,
    params: DynamicsParams,
    policy: ScriptedOperator | None = None,
    probes: bool = True,
    respondent: str = "perfect",
    snapshots: bool = True,
    component_index: int = 0,
) -> tuple[TrialRow, EventLog]:
    levels = None
    if probes:
        plans = component_level_plans(seed)
        levels = plans[component_index % 2]
    runner = TrialRunner(
        difficulty=difficulty,
        scenario_seed=seed,
        model=model,
        seed=seed,
        params=params,
        probe_levels=levels,
        respondent=Respondent(respondent, seed) if probes else None,
        policy=policy,
        snapshots=snapshots,
        component_index=component_index,
    )
    result = runner.run()
    records = result.log.records
    minutes = mx.decision_times(records)
    decisions = [r for r in records if r.kind == "DecisionCompleted"]
    correct = sum(int(r.payload["success"]) for r in decisions)
    row = TrialRow(
        difficulty=difficulty,
        seed=seed,
        decisions=len(decisions),
        correct=correct,
        decision_minutes=minutes,
        success_pct=(100.0 * correct / len(decisions)) if decisions else 0.0,
        end_reason=result.sim.end_reason or "none",
        duration_s=result.sim.t,
    )
    return row, result.log


def run_batch(spec: BatchSpec, progress=None) -> BatchReport:
    """Run every trial in the batch; trial i uses seed_base + i."""
    spec.validate()
    difficulties = ["easy", "hard"] if spec.difficulty == "both" else [spec.difficulty]
    rows: list[TrialRow] = []
    out = spec.out_dir
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
    for difficulty in difficulties:
        for i in range(spec.trials):
            seed = spec.seed_base + i
            row, log = run_trial(
                difficulty,
                seed,
                spec.model,
                spec.params,
                policy=spec.policy,
                probes=spec.probes,
                respondent=spec.respondent,
            )
            if out is not None:
                row.log_path = out / f"{spec.model.value}_{difficulty}_{seed}.hclog"
                log.save(row.log_path)
            rows.append(row)
            if progress is not None:
                progress(row)
    report = BatchReport(spec=spec, rows=rows)
    if out is not None:
        (out / "report.txt").write_text(report.text(), encoding="utf-8")
        if spec.figures:
            render_batch_figures(report, out)
    return report


def verify_logs(paths: list[Path]) -> dict[Path, int]:
    """Replay each log file; returns per-file divergence counts."""
    out: dict[Path, int] = {}
    for path in paths:
        out[path] = replay_log(EventLog.load(path)).divergences
    return out


# ---------------------------------------------------------------------------
# Figures
# ---------------------------------------------------------------------------

def _matplotlib():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def render_batch_figures(report: BatchReport, out_dir: Path) -> list[Path]:
    plt = _matplotlib()
    out: list[Path] = []
    difficulties = sorted({r.difficulty for r in report.rows})

    fig, ax = plt.subplots(figsize=(7, 4.2))
    for difficulty in difficulties:
        times = report.pooled_times(difficulty)
        if times:
            ax.hist(times, bins=24, alpha=0.55, label=f"{difficulty} (n={len(times)})")
    ax.set_xlabel("decision time (min)")
    ax.set_ylabel("decisions")
    ax.set_title(f"Decision time by difficulty ({report.spec.model.value})")
    ax.legend()
    fig.tight_layout()
    path = out_dir / "decision_time_hist.png"
    fig.savefig(path, dpi=120)
    plt.close(fig)
    out.append(path)

    fig, ax = plt.subplots(figsize=(6, 4.2))
    positions = range(len(difficulties))
    data = [report.success_values(d) for d in difficulties]
    ax.boxplot(data, positions=list(positions), widths=0.5)
    ax.set_xticks(list(positions), difficulties)
    ax.set_ylabel("per-trial selection success (%)")
    ax.set_title("Selection success by difficulty")
    means = [statistics.fmean(v) if v else 0.0 for v in data]
    ax.plot(list(positions), means, "r^", label="mean")
    ax.legend()
    fig.tight_layout()
    path = out_dir / "success_by_difficulty.png"
    fig.savefig(path, dpi=120)
    plt.close(fig)
    out.append(path)
    return out


def render_trial_figures(log: EventLog, out_dir: Path, stem: str = "trial") -> list[Path]:
    """Support timeline and decision markers for one recorded trial."""
    plt = _matplotlib()
    out_dir.mkdir(parents=True, exist_ok=True)
    series: dict[tuple[str, int], list[tuple[float, int]]] = {}
    for r in log.records:
        if r.kind != "TickSnapshot":
            continue
        coll = r.payload["coll"]
        for chunk in r.payload["support"].split(","):
            if not chunk:
                continue
            tid, _, n = chunk.partition(":")
            series.setdefault((coll, int(tid)), []).append((r.t, int(n)))
    fig, ax = plt.subplots(figsize=(9, 4.5))
    for (coll, tid), points in sorted(series.items()):
        if max(n for _, n in points) < 10:
            continue  # unreadable clutter otherwise
        xs, ys = zip(*points)
        ax.plot(xs, ys, lw=1.2, label=f"{coll}:t{tid}")
    for r in log.records:
        if r.kind == "ExecutionStarted":
            ax.axvline(r.t, color="gray", lw=0.8, ls="--")
    ax.set_xlabel("time (s)")
    ax.set_ylabel("favoring agents")
    ax.set_title("Per-target support over time (executions dashed)")
    if series:
        ax.legend(fontsize=7, ncols=2)
    fig.tight_layout()
    path = out_dir / f"{stem}_support_timeline.png"
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return [path]


# ---------------------------------------------------------------------------
# Calibration
# ---------------------------------------------------------------------------

DEFAULT_GRID = {
    "recruit_rate": [0.9, 1.0],
    "discovery_rate": [0.35, 0.45],
    "cross_inhibition": [0.7, 0.9],
    "abandon_rate": [0.1, 0.15],
    "value_floor": [55.0, 60.0],
}


def calibrate(
    trials: int = 12,
    seed_base: int = 9000,
    grid: dict[str, list[float]] | None = None,
    progress=None,
) -> tuple[DynamicsParams, list[dict]]:
    """Coarse grid search minimizing squared error to the baseline targets.

    Error mixes decision-time minutes and success percent (scaled to
    comparable magnitudes) over easy and hard cells.
    """
    grid = grid or DEFAULT_GRID
    names = sorted(grid)
    results = []
    best = None
    for combo in itertools.product(*(grid[n] for n in names)):
        overrides = dict(zip(names, combo))
        params = DynamicsParams(**overrides)
        cell = {"params": overrides}
        err = 0.0
        for difficulty in ("easy", "hard"):
            times, succ_rows = [], []
            for i in range(trials):
                row, _ = run_trial(
                    difficulty, seed_base + i, ModelKind.M2_SIM, params,
                    probes=False, snapshots=False,
                )
                times.extend(row.decision_minutes)
                succ_rows.append(row.success_pct)
            mean_t = statistics.fmean(times) if times else 99.0
            mean_s = statistics.fmean(succ_rows) if succ_rows else 0.0
            cell[f"{difficulty}_decision_min"] = mean_t
            cell[f"{difficulty}_success_pct"] = mean_s
            err += (mean_t - SIM_BASELINE["decision_min"][difficulty]) ** 2
            err += ((mean_s - SIM_BASELINE["success_pct"][difficulty]) / 10.0) ** 2
        cell["error"] = err
        results.append(cell)
        if best is None or err < best["error"]:
            best = cell
        if progress is not None:
            progress(cell)
    return DynamicsParams(**best["params"]), results
