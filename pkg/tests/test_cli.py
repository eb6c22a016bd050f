from pathlib import Path

import yaml

from hubswarm.cli import EXIT_CONFIG, EXIT_DETERMINISM, EXIT_ERROR, EXIT_OK, main


def test_run_writes_logs_report_and_figures(tmp_path, capsys):
    out = tmp_path / "batch"
    code = main([
        "run", "--model", "m2sim", "--difficulty", "easy", "--trials", "1",
        "--seed", "901", "--out", str(out), "--no-probes",
    ])
    assert code == EXIT_OK
    stdout = capsys.readouterr().out
    assert "batch.easy.decision_min_mean=" in stdout
    assert (out / "report.txt").exists()
    assert (out / "m2sim_easy_901.hclog").exists()
    assert (out / "decision_time_hist.png").exists()
    assert (out / "success_by_difficulty.png").exists()


def test_run_rejects_policy_for_baseline(tmp_path):
    policy = tmp_path / "p.policy"
    policy.write_text("if t > 1 : decide best\n")
    code = main([
        "run", "--model", "m2sim", "--trials", "1", "--seed", "1",
        "--policy", str(policy),
    ])
    assert code == EXIT_CONFIG


def test_run_bad_policy_file_is_config_error(tmp_path):
    policy = tmp_path / "bad.policy"
    policy.write_text("if gremlins : attack\n")
    code = main([
        "run", "--model", "m2", "--trials", "1", "--seed", "1", "--policy", str(policy),
    ])
    assert code == EXIT_CONFIG


def test_replay_clean_log_exits_zero(tmp_path, capsys):
    out = tmp_path / "batch"
    assert main(["run", "--model", "m2sim", "--difficulty", "hard", "--trials", "1",
                 "--seed", "77", "--out", str(out), "--no-probes", "--no-figures"]) == EXIT_OK
    log = next(out.glob("*.hclog"))
    code = main(["replay", str(log)])
    assert code == EXIT_OK
    assert "0 divergences" in capsys.readouterr().out


def test_replay_corrupt_log_exits_three(tmp_path, capsys):
    out = tmp_path / "batch"
    main(["run", "--model", "m2sim", "--difficulty", "easy", "--trials", "1",
          "--seed", "78", "--out", str(out), "--no-probes", "--no-figures"])
    log = next(out.glob("*.hclog"))
    lines = log.read_text().splitlines()
    for i, line in enumerate(lines):
        if "StateTransition" in line and "reason=recruit" in line:
            lines[i] = line.replace("reason=recruit", "reason=inhibit", 1)
            break
    log.write_text("\n".join(lines) + "\n")
    code = main(["replay", str(log)])
    assert code == EXIT_DETERMINISM
    assert "first at seq" in capsys.readouterr().out


def test_replay_unreadable_log_exits_one(tmp_path):
    assert main(["replay", str(tmp_path / "nope.hclog")]) == EXIT_ERROR


def test_metrics_table(tmp_path, capsys):
    out = tmp_path / "batch"
    main(["run", "--model", "m2sim", "--difficulty", "easy", "--trials", "1",
          "--seed", "79", "--out", str(out), "--no-figures"])
    log = next(out.glob("*.hclog"))
    code = main(["metrics", str(log), "--out", str(tmp_path / "m")])
    assert code == EXIT_OK
    stdout = capsys.readouterr().out
    assert ".decision_min_mean=" in stdout
    assert ".success_pct=" in stdout
    assert ".probes_correct_pct=" in stdout
    assert (tmp_path / "m" / "metrics.txt").exists()


def test_params_file_round_trip(tmp_path, capsys):
    params = tmp_path / "params.yaml"
    params.write_text(yaml.safe_dump({"recruit_rate": 0.8, "hub_dwell_s": 1.5}))
    code = main(["run", "--model", "m2sim", "--difficulty", "easy", "--trials", "1",
                 "--seed", "80", "--params", str(params), "--no-probes", "--no-figures"])
    assert code == EXIT_OK


def test_bad_params_file_is_config_error(tmp_path):
    params = tmp_path / "params.yaml"
    params.write_text(yaml.safe_dump({"recruit_rate": 9.0}))
    code = main(["run", "--model", "m2sim", "--trials", "1", "--params", str(params)])
    assert code == EXIT_CONFIG


def test_scenario_subcommand(tmp_path, capsys):
    path = tmp_path / "c.yaml"
    assert main(["scenario", "--difficulty", "hard", "--seed", "3", "--out", str(path)]) == EXIT_OK
    data = yaml.safe_load(path.read_text())
    assert data["difficulty"] == "hard"
    assert len(data["targets"]) == 16


def test_calibrate_small_grid_cli(tmp_path, capsys):
    code = main(["calibrate", "--trials", "1", "--seed", "950", "--grid", "small",
                 "--out", str(tmp_path)])
    assert code == EXIT_OK
    assert "recruit_rate" in capsys.readouterr().out
    assert (tmp_path / "calibration.yaml").exists()
    assert (tmp_path / "calibration_cells.json").exists()
