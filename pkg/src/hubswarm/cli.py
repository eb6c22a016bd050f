"""Command-line entry point.

    sim run        headless batches (per-trial .hclog + report + figures)
    sim replay     verify a recorded log replays divergence-free
    sim metrics    recompute the metric table from recorded logs
    sim calibrate  grid-search dynamics parameters against the baselines
    sim serve      live operator session over WebSocket

Exit codes: 0 ok, 1 runtime/IO error, 2 configuration error,
3 determinism violation.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import yaml

from . import metrics as mx
from .core import ConfigurationError, DynamicsParams, ModelKind
from .events import EventLog, LogCorruptionError
from .policy import PolicyParseError, load_policy
from .runner import BatchSpec, run_batch, calibrate, render_trial_figures
from .scenario import generate_component
from .trial import replay_file

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_CONFIG = 2
EXIT_DETERMINISM = 3

_MODELS = {m.value: m for m in ModelKind}


def _load_params(path: str | None) -> DynamicsParams:
    if path is None:
        return DynamicsParams()
    try:
        with open(path, encoding="utf-8") as fh:
            data = yaml.safe_load(fh) or {}
        return DynamicsParams.from_dict({**DynamicsParams().to_dict(), **data})
    except (OSError, TypeError, yaml.YAMLError) as exc:
        raise ConfigurationError(f"cannot load params file {path}: {exc}") from exc


def cmd_run(args) -> int:
    if args.policy == "oracle-assist":
        from .policy import ORACLE_ASSIST, ScriptedOperator, parse_policy

        policy = ScriptedOperator(parse_policy(ORACLE_ASSIST))
    elif args.policy:
        policy = load_policy(args.policy)
    else:
        policy = None
    spec = BatchSpec(
        model=_MODELS[args.model],
        difficulty=args.difficulty,
        trials=args.trials,
        seed_base=args.seed,
        params=_load_params(args.params),
        policy=policy,
        probes=not args.no_probes,
        out_dir=Path(args.out) if args.out else None,
        figures=not args.no_figures,
    )
    def progress(row):
        print(
            f"trial {row.difficulty} seed={row.seed}: {row.decisions} decisions, "
            f"{row.success_pct:.0f}% correct, end={row.end_reason} at {row.duration_s:.0f}s"
        )
    report = run_batch(spec, progress=progress if args.verbose else None)
    sys.stdout.write(report.text())
    if args.out:
        print(f"wrote {len(report.rows)} logs and report.txt to {args.out}", file=sys.stderr)
    return EXIT_OK


def cmd_replay(args) -> int:
    status = EXIT_OK
    for path in args.logfile:
        try:
            report = replay_file(path)
        except (OSError, LogCorruptionError) as exc:
            print(f"{path}: unreadable or corrupt log: {exc}", file=sys.stderr)
            return EXIT_ERROR
        print(
            f"{path}: {report.records_checked} records, {report.divergences} divergences"
            + (f" (first at seq {report.first_divergent_seq})" if report.divergences else "")
        )
        if report.divergences:
            status = EXIT_DETERMINISM
        else:
            records = report.log.records
            print(f"  decisions={len([r for r in records if r.kind == 'DecisionCompleted'])}", end="")
            try:
                print(f" success={mx.selection_success_rate(records):.1f}%", end="")
            except mx.MetricDomainError:
                pass
            print()
    return status


def cmd_metrics(args) -> int:
    sections: dict[str, dict[str, float]] = {}
    for path in args.logfile:
        try:
            log = EventLog.load(path)
        except (OSError, LogCorruptionError) as exc:
            print(f"{path}: {exc}", file=sys.stderr)
            return EXIT_ERROR
        records = log.records
        name = Path(path).stem
        sec: dict[str, float] = {}
        times = mx.decision_times(records)
        if times:
            sec.update({f"decision_min_{k}": v for k, v in mx.Aggregate(times).summary().items()})
            sec["success_pct"] = mx.selection_success_rate(records)
            sec.update({f"target_value_{k}": v for k, v in mx.selected_target_value_stats(records).items()})
        sec["abandon_excess_pct"] = mx.abandon_excess_rate(records)
        grades = mx.probe_grades(records)
        if grades:
            sec["probes_answered"] = float(len(grades))
            sec["probes_correct_pct"] = 100.0 * sum(c for _, c in grades) / len(grades)
        sections[name] = sec
        if args.figures and args.out:
            render_trial_figures(log, Path(args.out), stem=name)
    sys.stdout.write(mx.format_report(sections))
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "metrics.txt").write_text(mx.format_report(sections), encoding="utf-8")
    return EXIT_OK


def cmd_calibrate(args) -> int:
    def progress(cell):
        print(
            f"cell {cell['params']}: easy {cell['easy_decision_min']:.2f}min/"
            f"{cell['easy_success_pct']:.0f}%  hard {cell['hard_decision_min']:.2f}min/"
            f"{cell['hard_success_pct']:.0f}%  err={cell['error']:.2f}",
            file=sys.stderr,
        )
    grid = {"recruit_rate": [0.9, 1.0]} if args.grid == "small" else None
    best, results = calibrate(trials=args.trials, seed_base=args.seed, grid=grid, progress=progress)
    print("# best-fit dynamics parameters")
    print(yaml.safe_dump(best.to_dict(), sort_keys=True), end="")
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "calibration.yaml", "w", encoding="utf-8") as fh:
            yaml.safe_dump(best.to_dict(), fh, sort_keys=True)
        with open(out / "calibration_cells.json", "w", encoding="utf-8") as fh:
            json.dump(results, fh, indent=2)
        print(f"wrote calibration.yaml and cells to {args.out}", file=sys.stderr)
    return EXIT_OK


def cmd_serve(args) -> int:
    import asyncio

    from .gateway import SessionGateway

    scenario_seed = args.scenario_seed if args.scenario_seed is not None else args.seed
    config = generate_component(args.difficulty, scenario_seed)
    if args.duration is not None:
        config.duration_limit_s = args.duration
    if args.soft_cap is not None:
        config.soft_cap = args.soft_cap
    gw = SessionGateway(
        difficulty=args.difficulty,
        scenario_seed=scenario_seed,
        model=_MODELS[args.model],
        seed=args.seed,
        params=_load_params(args.params),
        view=args.view,
        speed=args.speed,
        host=args.host,
        port=args.port,
        probes=not args.no_probes,
        out_path=args.out,
        config=config,
    )

    async def main():
        task = asyncio.create_task(gw.run())
        while gw.bound_port is None and not task.done():
            await asyncio.sleep(0.01)
        if gw.bound_port is not None:
            print(f"session {gw.session_id} listening on ws://{args.host}:{gw.bound_port}", flush=True)
        await task

    asyncio.run(main())
    print(f"trial ended: {gw.sim.end_reason}")
    return EXIT_OK


def cmd_scenario(args) -> int:
    cfg = generate_component(args.difficulty, args.seed)
    if args.out:
        cfg.save(args.out)
        print(f"wrote {args.out}")
    else:
        sys.stdout.write(yaml.safe_dump(cfg.to_dict(), sort_keys=False))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sim", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run headless seeded batches")
    p.add_argument("--model", choices=sorted(_MODELS), default="m2sim")
    p.add_argument("--difficulty", choices=["easy", "hard", "both"], default="both")
    p.add_argument("--trials", type=int, default=50)
    p.add_argument("--seed", type=int, default=1000, help="seed base; trial i uses seed+i")
    p.add_argument("--params", help="YAML file overriding dynamics parameters")
    p.add_argument("--policy", help="scripted operator policy file, or the literal 'oracle-assist'")
    p.add_argument("--out", help="directory for per-trial logs, report, figures")
    p.add_argument("--no-probes", action="store_true")
    p.add_argument("--no-figures", action="store_true")
    p.add_argument("--verbose", action="store_true")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("replay", help="verify logs replay divergence-free")
    p.add_argument("logfile", nargs="+")
    p.set_defaults(func=cmd_replay)

    p = sub.add_parser("metrics", help="recompute metric tables from logs")
    p.add_argument("logfile", nargs="+")
    p.add_argument("--out", help="directory for metrics.txt and figures")
    p.add_argument("--figures", action="store_true")
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("calibrate", help="grid-search dynamics parameters")
    p.add_argument("--trials", type=int, default=12, help="trials per difficulty per cell")
    p.add_argument("--seed", type=int, default=9000)
    p.add_argument("--grid", choices=["small", "full"], default="full")
    p.add_argument("--out", help="directory for calibration.yaml")
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("serve", help="serve a live operator session")
    p.add_argument("--model", choices=sorted(_MODELS), default="m2")
    p.add_argument("--difficulty", choices=["easy", "hard"], default="easy")
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--scenario-seed", type=int, default=None)
    p.add_argument("--params")
    p.add_argument("--view", choices=["ia", "collective"], default="ia")
    p.add_argument("--speed", type=float, default=1.0)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8760)
    p.add_argument("--duration", type=float, default=None, help="override the component duration limit (s)")
    p.add_argument("--soft-cap", type=int, default=None, help="override the post-limit decision floor")
    p.add_argument("--no-probes", action="store_true")
    p.add_argument("--out", help="write the session event log here on trial end")
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("scenario", help="generate a trial component config")
    p.add_argument("--difficulty", choices=["easy", "hard"], default="easy")
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--out")
    p.set_defaults(func=cmd_scenario)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigurationError, PolicyParseError, ValueError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
