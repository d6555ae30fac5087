import json
from pathlib import Path

import numpy as np
import pytest

from izosga.config import ConfigError
from izosga.experiments import (
    CSV_HEADER,
    Checkpoint,
    CheckpointMismatchError,
    CurveAggregate,
    derive_seed,
    emit_csv,
    emit_svg,
    final_window,
    load_checkpoint,
    load_experiment,
    parse_seeds,
    run_deploy,
    run_schedule,
    run_sweep,
    run_train,
    run_train_deploy,
    save_checkpoint,
    trailing_mean,
)
from izosga.irs import IdealIrs

GOLDEN = Path(__file__).parent / "golden"

SCENARIO = """
[scenario]
name = "toy"
tx_antennas = 2
users = 2
irs_elements = 4
noise_var_watts = 0.5
geometry_seed = 3

[links.tx_irs]
mean_gain = 1.0
rician_factor = 1.0
"""


def toy_aggregate():
    t = np.arange(12)
    curves = np.stack([np.sin(t / 3.0) + 2, np.cos(t / 4.0) + 2])
    eps = np.full_like(curves, np.nan)
    eps[:, ::5] = 0.25
    return CurveAggregate.from_curves("toy", curves, np.full(12, 5), eps)


def make_experiment(tmp_path, recipe="sweep", extra=""):
    (tmp_path / "toy.toml").write_text(SCENARIO)
    text = f"""
[experiment]
name = "toy-{recipe}"
recipe = "{recipe}"
scenario = "toy.toml"
seeds = 2
output = "{tmp_path / 'out'}"
budgets = [1, 3]
train_budget = 3
deploy_budgets = [1, 3]
deploy_iterations = 20
{extra}

[optimizer]
iterations = 15
step_size = 0.2
smoothing = 0.001
warm_start = false
seed = 42
"""
    path = tmp_path / f"{recipe}.toml"
    path.write_text(text)
    return path


def test_derive_seed_is_stable_and_distinct():
    a = derive_seed(42, 0, 0)
    assert a == derive_seed(42, 0, 0)
    assert 0 <= a < 2**64
    seen = {derive_seed(42, s, b, st) for s in range(5) for b in range(3) for st in range(3)}
    assert len(seen) == 45


def test_parse_seeds():
    assert parse_seeds(3) == [0, 1, 2]
    assert parse_seeds("4") == [0, 1, 2, 3]
    assert parse_seeds("5,9") == [5, 9]
    assert parse_seeds([7]) == [7]
    with pytest.raises(ValueError):
        parse_seeds(0)
    with pytest.raises(ValueError):
        parse_seeds([])


def test_csv_schema_in_fresh_directory(tmp_path):
    path = emit_csv(toy_aggregate(), tmp_path / "new" / "curve.csv")
    lines = path.read_text().splitlines()
    assert lines[0] == CSV_HEADER
    assert len(lines) == 13
    assert lines[1].split(",")[4] == "0.2500000000"
    assert lines[2].split(",")[4] == ""


def test_csv_golden_bytes(tmp_path):
    path = emit_csv(toy_aggregate(), tmp_path / "toy.csv")
    assert path.read_bytes() == (GOLDEN / "toy.csv").read_bytes()


def test_svg_golden_bytes(tmp_path):
    agg = toy_aggregate()
    path = emit_svg({"budget 5": agg.mean, "baseline": agg.mean - 1}, tmp_path / "toy.svg", title="toy", smooth=3)
    assert path.read_bytes() == (GOLDEN / "toy.svg").read_bytes()


def test_svg_has_polylines_and_legend(tmp_path):
    text = emit_svg({"a": np.arange(5.0), "b": np.ones(5)}, tmp_path / "x.svg").read_text()
    assert text.count("<polyline") == 2
    assert ">a</text>" in text and "iteration" in text


def test_series_length_mismatch_rejected(tmp_path):
    with pytest.raises(ValueError):
        emit_svg({"a": np.ones(5), "b": np.ones(6)}, tmp_path / "x.svg")
    with pytest.raises(ValueError):
        emit_svg({}, tmp_path / "x.svg")
    agg = toy_aggregate()
    agg.budget = agg.budget[:-1]
    with pytest.raises(ValueError):
        emit_csv(agg, tmp_path / "x.csv")


def test_io_error_names_path(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    with pytest.raises(OSError) as err:
        emit_csv(toy_aggregate(), blocker / "sub" / "x.csv")
    assert "file" in str(err.value)


def test_single_seed_std_zero():
    agg = CurveAggregate.from_curves("one", np.ones((1, 4)) * 2.5, np.ones(4, int))
    np.testing.assert_array_equal(agg.std, 0.0)


def test_trailing_mean_and_window():
    np.testing.assert_allclose(trailing_mean([1, 2, 3, 4], 2), [1, 1.5, 2.5, 3.5])
    per_seed, w = final_window(np.arange(40.0).reshape(2, 20), 0.05)
    assert w == 1
    np.testing.assert_array_equal(per_seed, [19, 39])


def test_checkpoint_round_trip_bit_identical(tmp_path):
    box = IdealIrs(3).box
    rng = np.random.default_rng(0)
    thetas = np.stack([box.uniform(rng) for _ in range(2)])
    thetas[0, 0] = 1 / 3
    ckpt = Checkpoint("ideal", box, thetas, "abc", {"note": "x"}, returned_thetas=thetas[::-1])
    path = save_checkpoint(ckpt, tmp_path / "c.json")
    back = load_checkpoint(path, expected_fingerprint="abc")
    np.testing.assert_array_equal(back.thetas, thetas)
    np.testing.assert_array_equal(back.returned_thetas, thetas[::-1])
    np.testing.assert_array_equal(back.box.upper, box.upper)
    doc = json.loads(path.read_text())
    assert doc["format_version"] == 1 and isinstance(doc["theta"][0][0], str)
    with pytest.raises(CheckpointMismatchError):
        load_checkpoint(path, expected_fingerprint="other")


def test_checkpoint_outside_box_rejected(tmp_path):
    box = IdealIrs(1).box
    with pytest.raises(ValueError):
        save_checkpoint(Checkpoint("ideal", box, np.array([[2.0, 0.0]]), "f"), tmp_path / "c.json")


def test_sweep_outputs_and_determinism(tmp_path):
    spec = load_experiment(make_experiment(tmp_path))
    summary = run_sweep(spec, tmp_path / "a", svg=True)
    assert summary["ok"] and not summary["failed_runs"]
    files = sorted(p.name for p in (tmp_path / "a").iterdir())
    for name in ("sweep_b01.csv", "sweep_b03.csv", "baseline_b01.csv", "baseline_b03.csv", "sweep.svg",
                 "summary.json", "resolved_config.json"):
        assert name in files
    lines = (tmp_path / "a" / "sweep_b03.csv").read_text().splitlines()
    assert lines[0] == CSV_HEADER and len(lines) == 17
    assert summary["budgets"]["b03"]["runs"] == 2
    resolved = json.loads((tmp_path / "a" / "resolved_config.json").read_text())
    assert resolved["scenario"]["scenario"]["power_budget_watts"] == 1.0
    run_sweep(load_experiment(make_experiment(tmp_path)), tmp_path / "b", svg=True)
    for name in ("sweep_b01.csv", "sweep_b03.csv", "baseline_b01.csv", "sweep.svg"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_worker_pool_matches_serial(tmp_path):
    spec = load_experiment(make_experiment(tmp_path))
    run_sweep(spec, tmp_path / "serial")
    run_sweep(spec, tmp_path / "pool", workers=2)
    for name in ("sweep_b01.csv", "sweep_b03.csv", "baseline_b03.csv"):
        assert (tmp_path / "serial" / name).read_bytes() == (tmp_path / "pool" / name).read_bytes()


def test_schedule_recipe(tmp_path):
    extra = 'schedules = { "down" = [[0, 3], [8, 1]], "flat" = [[0, 3]] }'
    spec = load_experiment(make_experiment(tmp_path, "schedule", extra))
    summary = run_schedule(spec, tmp_path / "s")
    segs = summary["schedules"]["down"]["segments"]
    assert [(s["start"], s["stop"], s["budget"]) for s in segs] == [(0, 7, 3), (8, 15, 1)]
    budgets = [int(l.split(",")[3]) for l in (tmp_path / "s" / "schedule_down.csv").read_text().splitlines()[1:]]
    assert budgets == [3] * 8 + [1] * 8


def test_train_deploy(tmp_path):
    spec = load_experiment(make_experiment(tmp_path, "train-deploy"))
    out = tmp_path / "td"
    summary = run_train_deploy(spec, out)
    assert (out / "checkpoint.json").exists()
    rows = (out / "deploy.csv").read_text().splitlines()
    assert rows[0].startswith("budget,mean_sumrate_bits")
    assert [r["budget"] for r in summary["deploy"]] == [1, 3]
    again = run_deploy(spec, out / "checkpoint.json", tmp_path / "again")
    assert again["deploy"] == summary["deploy"]


def test_deploy_rejects_foreign_checkpoint(tmp_path):
    spec = load_experiment(make_experiment(tmp_path, "train-deploy"))
    run_train(spec, tmp_path / "t")
    (tmp_path / "toy.toml").write_text(SCENARIO + "\n# edited\n")
    spec2 = load_experiment(tmp_path / "train-deploy.toml")
    with pytest.raises(CheckpointMismatchError):
        run_deploy(spec2, tmp_path / "t" / "checkpoint.json", tmp_path / "t")


def test_deploy_budget_equal_to_train_lies_in_band(tmp_path):
    spec = load_experiment(make_experiment(tmp_path, "train-deploy").as_posix(),
                           {"deploy_budgets": [3], "deploy_iterations": 200})
    summary = run_train_deploy(spec, tmp_path / "band")
    lo, hi = summary["train"]["terminal_band"]
    assert lo <= summary["deploy"][0]["mean"] <= hi


def test_experiment_validation(tmp_path):
    path = make_experiment(tmp_path, "schedule")
    with pytest.raises(ConfigError):
        load_experiment(path)  # schedule recipe without schedules
    bad = tmp_path / "bad.toml"
    bad.write_text('[experiment]\nrecipe = "dance"\nseeds = 0\n')
    with pytest.raises(ConfigError) as err:
        load_experiment(bad)
    msg = str(err.value)
    assert "recipe" in msg and "seeds" in msg and "scenario" in msg


def test_trained_checkpoint_beats_random_one(tmp_path):
    from izosga.experiments import deploy_table
    from izosga.optimizer import random_thetas

    spec = load_experiment(make_experiment(tmp_path, "train-deploy"),
                           {"seeds": 3})
    spec.optimizer.iterations = 400
    run_train(spec, tmp_path / "t")
    trained = load_checkpoint(tmp_path / "t" / "checkpoint.json").thetas
    env = spec.environment()
    random = random_thetas(env, [100, 101, 102])
    good = deploy_table(env, trained, [1, 3], 300, 7, [0, 1, 2])
    bad = deploy_table(env, random, [1, 3], 300, 7, [0, 1, 2])
    for g, b in zip(good, bad):
        assert g["mean"] > b["mean"]
