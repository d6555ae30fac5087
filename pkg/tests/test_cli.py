import json

import pytest

from izosga.cli import build_parser, main

from test_experiments import make_experiment


def test_parser_has_all_subcommands():
    parser = build_parser()
    for cmd in ("sweep", "schedule", "train", "deploy", "physical"):
        args = parser.parse_args([cmd, "--config", "x.toml", "--out", "o", "--seeds", "3", "--workers", "2", "--svg"])
        assert args.command == cmd and args.seeds == "3" and args.workers == 2 and args.svg
    assert parser.parse_args(["check"]).command == "check"


def test_sweep_then_exit_zero(tmp_path, capsys):
    cfg = make_experiment(tmp_path)
    out = tmp_path / "cli"
    assert main(["sweep", "--config", str(cfg), "--out", str(out), "--seeds", "1", "--svg"]) == 0
    summary = json.loads((out / "summary.json").read_text())
    assert summary["seeds"] == [0]
    assert (out / "sweep.svg").exists()
    assert json.loads(capsys.readouterr().out.strip())["ok"] is True


def test_seed_list_flag(tmp_path):
    cfg = make_experiment(tmp_path)
    out = tmp_path / "cli"
    assert main(["sweep", "--config", str(cfg), "--out", str(out), "--seeds", "4,7"]) == 0
    assert json.loads((out / "summary.json").read_text())["seeds"] == [4, 7]


def test_train_and_deploy(tmp_path):
    cfg = make_experiment(tmp_path, "train-deploy")
    out = tmp_path / "td"
    assert main(["train", "--config", str(cfg), "--out", str(out)]) == 0
    assert main(["deploy", "--config", str(cfg), "--out", str(out)]) == 0
    assert (out / "deploy.csv").exists()


def test_physical_needs_nothing_extra(tmp_path):
    cfg = make_experiment(tmp_path, "physical")
    assert main(["physical", "--config", str(cfg), "--out", str(tmp_path / "p"), "--seeds", "1"]) == 0


def test_bad_config_exit_code(tmp_path, capsys):
    bad = tmp_path / "bad.toml"
    bad.write_text('[experiment]\nrecipe = "dance"\n')
    assert main(["sweep", "--config", str(bad)]) == 2
    assert "recipe" in capsys.readouterr().err


def test_missing_checkpoint(tmp_path):
    cfg = make_experiment(tmp_path, "train-deploy")
    assert main(["deploy", "--config", str(cfg), "--out", str(tmp_path / "none")]) == 2


def test_check_subcommand(capsys):
    assert main(["check"]) == 0
    out = capsys.readouterr().out
    assert "PASS  gradient_vs_finite_differences" in out
    assert "FAIL" not in out


def test_requires_subcommand():
    with pytest.raises(SystemExit):
        main([])
