"""
Tests for the command-line surface: exit statuses, outputs and reproducibility.
"""

import json

import pytest

from leo_offload.api.commands import (
    EXIT_FAILURE,
    EXIT_MISSING_SCENARIO,
    EXIT_OK,
    apply_axis,
    load_agent,
    parse_seeds,
    run,
    sweep,
)
from leo_offload.core.errors import CheckpointError, OffloadError
from leo_offload.models.scenario import scenario_hash
from leo_offload.models.schedule import Schedule
from leo_offload.services.timeline import evaluate_schedule
from leo_offload.utils.provenance import read_csv, read_header
from leo_offload.utils.scenario_presets import SCENARIO_DIR, get_presets, resolve_scenario


def test_presets_resolve_to_bundled_files(tmp_path):
    assert [p["name"] for p in get_presets()] == ["table2", "tiny", "medium"]
    assert [p["name"] for p in get_presets(category="oracle")] == ["tiny"]
    assert resolve_scenario("tiny") == SCENARIO_DIR / "tiny.scenario"
    assert resolve_scenario("table2.scenario") == SCENARIO_DIR / "table2.scenario"
    local = tmp_path / "tiny"
    local.write_text("num_tasks: 1\n")
    assert resolve_scenario(local) == local


def test_parse_seeds():
    assert parse_seeds("1..5") == [1, 2, 3, 4, 5]
    assert parse_seeds("3,1,2") == [3, 1, 2]
    assert parse_seeds("0,4..5") == [0, 4, 5]
    with pytest.raises(OffloadError):
        parse_seeds(",")


def test_axis_values_become_thresholds(tiny_cfg):
    assert apply_axis(tiny_cfg, "reliability", 99).failure_threshold == pytest.approx(0.01)
    assert apply_axis(tiny_cfg, "privacy", 60).privacy_threshold == pytest.approx(0.6)
    assert apply_axis(tiny_cfg, "tasks", 5).num_tasks == 5
    with pytest.raises(OffloadError):
        apply_axis(tiny_cfg, "altitude", 1)


def test_missing_scenario_exits_with_2(tmp_path):
    code = run(["evaluate", "--scenario", str(tmp_path / "nope.scenario"), "--policy", "uniform",
                "--output-dir", str(tmp_path)])
    assert code == EXIT_MISSING_SCENARIO


def test_usage_error_exits_with_2(tmp_path):
    with pytest.raises(SystemExit) as excinfo:
        run(["sweep", "--scenario", "tiny", "--axis", "altitude", "--values", "1"])
    assert excinfo.value.code == 2


def test_invalid_scenario_file_exits_with_1(tmp_path):
    bad = tmp_path / "bad.scenario"
    bad.write_text("num_tasks: 0\n")
    assert run(["evaluate", "--scenario", str(bad), "--policy", "uniform", "--output-dir", str(tmp_path)]) == EXIT_FAILURE


def test_evaluate_writes_per_seed_and_aggregate_rows(tmp_path, tiny_cfg):
    code = run(["evaluate", "--scenario", "tiny", "--policy", "uniform", "--seeds", "1..5",
                "--output-dir", str(tmp_path), "--timelines"])
    assert code == EXIT_OK

    path = tmp_path / "evaluate_uniform.csv"
    frame = read_csv(path)
    assert len(frame) == 6
    assert [str(s) for s in frame["seed"]] == ["1", "2", "3", "4", "5", "aggregate"]
    assert frame["C_std"].iloc[-1] == 0.0
    header = read_header(path)
    assert header["scenario_sha256"] == scenario_hash(tiny_cfg)
    assert header["seed"] == "1,2,3,4,5"
    assert (tmp_path / "timeline_uniform_seed1.csv").exists()


def test_evaluate_reruns_are_byte_identical(tmp_path):
    args = ["evaluate", "--scenario", "tiny", "--policy", "random", "--pool-size", "20", "--seeds", "1,2"]
    assert run(args + ["--output-dir", str(tmp_path / "a")]) == EXIT_OK
    assert run(args + ["--output-dir", str(tmp_path / "b")]) == EXIT_OK
    first = (tmp_path / "a" / "evaluate_random.csv").read_bytes()
    second = (tmp_path / "b" / "evaluate_random.csv").read_bytes()
    assert first == second


def test_default_output_root(output_root):
    assert run(["evaluate", "--scenario", "tiny", "--policy", "uniform"]) == EXIT_OK
    assert (output_root / "evaluate" / "evaluate_uniform.csv").exists()


def test_sweep_over_tasks(tmp_path):
    code = run(["sweep", "--scenario", "tiny", "--axis", "tasks", "--values", "3,4",
                "--policies", "uniform,random", "--seeds", "1..3", "--pool-size", "20",
                "--output-dir", str(tmp_path)])
    assert code == EXIT_OK
    frame = read_csv(tmp_path / "sweep_tasks.csv")
    assert len(frame) == 12
    assert list(frame["value"].unique()) == [3.0, 4.0]
    assert list(frame["policy"].iloc[:3]) == ["uniform"] * 3
    assert list(frame["seed"].iloc[:3]) == [1, 2, 3]
    charts = json.loads((tmp_path / "sweep_tasks.json").read_text())
    assert charts


def test_uniform_is_flat_across_reliability(tiny_cfg):
    frame = sweep(tiny_cfg, "reliability", [95.0, 97.0, 99.0], ["uniform"], [0], workers=2)
    assert frame["C"].nunique() == 1


def test_sweep_rejects_unknown_policy(tiny_cfg):
    with pytest.raises(OffloadError):
        sweep(tiny_cfg, "tasks", [3], ["genius"], [0])


def test_oracle_export_and_cross_check(tmp_path, capsys, tiny_cfg):
    code = run(["oracle", "--scenario", "tiny", "--cross-check", "--output-dir", str(tmp_path)])
    assert code == EXIT_OK
    summary = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
    assert summary["count"] == 3072
    assert summary["feasible_found"]
    fixture = json.loads((tmp_path / "oracle.json").read_text())
    assert fixture["best"]["C"] == summary["C"]

    # the exported schedule replays to the same cost
    best = Schedule.from_dict({"decisions": fixture["best"]["schedule"]})
    assert evaluate_schedule(best, tiny_cfg).cost == fixture["best"]["C"]


def test_oracle_cap_exits_with_1(tmp_path):
    assert run(["oracle", "--scenario", "tiny", "--cap", "10", "--output-dir", str(tmp_path)]) == EXIT_FAILURE


def test_train_then_evaluate_checkpoint(tmp_path, capsys):
    code = run(["train", "--scenario", "tiny", "--steps", "128", "--horizon", "64", "--epochs", "1",
                "--minibatch", "32", "--output-dir", str(tmp_path)])
    assert code == EXIT_OK
    final = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
    assert final["algorithm"] == "ppo"
    assert final["timestep"] == 128

    log = read_csv(tmp_path / "training_log.csv")
    assert list(log["timestep"]) == [0, 64, 128]
    assert read_header(tmp_path / "training_log.csv")["algorithm"] == "ppo"
    assert (tmp_path / "training_chart.json").exists()

    checkpoint = str(tmp_path / "ppo.ckpt")
    assert run(["evaluate", "--scenario", "tiny", "--policy", checkpoint, "--seeds", "0,1",
                "--output-dir", str(tmp_path)]) == EXIT_OK
    assert len(read_csv(tmp_path / "evaluate_ppo.csv")) == 3

    # trained for N=3, M=3; the medium scenario does not fit
    assert run(["evaluate", "--scenario", "medium", "--policy", checkpoint,
                "--output-dir", str(tmp_path)]) == EXIT_FAILURE


def test_fixed_learning_rate_from_command_line(tmp_path):
    code = run(["train", "--scenario", "tiny", "--steps", "64", "--horizon", "32", "--epochs", "1",
                "--lr-mode", "fixed", "--lr", "0.01", "--output-dir", str(tmp_path)])
    assert code == EXIT_OK
    assert set(read_csv(tmp_path / "training_log.csv")["lr"]) == {0.01}


def test_train_dqn(tmp_path):
    assert run(["train", "--algo", "dqn", "--scenario", "tiny", "--steps", "100",
                "--output-dir", str(tmp_path)]) == EXIT_OK
    assert (tmp_path / "dqn.ckpt").exists()
    assert list(read_csv(tmp_path / "training_log.csv")["timestep"]) == [0, 100]


def test_invalid_hyperparameter_exits_with_1(tmp_path):
    assert run(["train", "--scenario", "tiny", "--steps", "64", "--lr", "-1",
                "--output-dir", str(tmp_path)]) == EXIT_FAILURE


def test_hyperparameter_file(tmp_path):
    hyper = tmp_path / "ppo.yaml"
    hyper.write_text("total_timesteps: 32\nhorizon: 32\nepochs: 1\nminibatch_size: 16\nhidden_sizes: [8]\n")
    assert run(["train", "--scenario", "tiny", "--hyper", str(hyper), "--output-dir", str(tmp_path)]) == EXIT_OK
    assert list(read_csv(tmp_path / "training_log.csv")["timestep"]) == [0, 32]


def test_mistyped_policy_exits_with_1(tmp_path):
    assert run(["evaluate", "--scenario", "tiny", "--policy", "unifrom", "--output-dir", str(tmp_path)]) == EXIT_FAILURE
    assert not list(tmp_path.glob("evaluate_*.csv"))


def test_load_agent_names_the_baselines(tmp_path):
    with pytest.raises(CheckpointError) as excinfo:
        load_agent(str(tmp_path / "ppo.ckpt"))
    assert "random, uniform, oracle" in str(excinfo.value)

    ragged = tmp_path / "ragged.ckpt"
    ragged.write_bytes(b"LEOCKPT\x00" + b"\x01")
    with pytest.raises(CheckpointError):
        load_agent(str(ragged))
