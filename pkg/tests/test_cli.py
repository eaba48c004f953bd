import json
import math

import pytest
from hypothesis import given, settings, strategies as st

from barrier_es.cli import main
from barrier_es.config import (SUITES, RunConfig, config_from_dict, read_config, suite,
                               write_config)
from barrier_es.diagnostics import read_trace
from barrier_es.engine import EngineConfig
from barrier_es.errors import ConfigError
from barrier_es.oracles import AccuracySchedule


def test_default_round_trip(tmp_path):
    write_config(RunConfig(), tmp_path / "c.json")
    assert read_config(tmp_path / "c.json") == RunConfig()


@pytest.mark.parametrize("name", SUITES)
def test_suite_round_trip(tmp_path, name):
    write_config(suite(name), tmp_path / "c.json")
    assert read_config(tmp_path / "c.json") == suite(name)


@settings(max_examples=30)
@given(st.integers(1, 50), st.floats(1e-3, 1.0), st.floats(0.5, 1.0, exclude_min=True),
       st.sampled_from(["fixed", "theoretical", "capped"]), st.floats(0.01, 0.99))
def test_round_trip_property(lam_prime, kappa, p, mode, nu):
    cfg = RunConfig({"name": "noisy-sphere", "n": 4},
                    EngineConfig(lam=2 * lam_prime, lam_prime=lam_prime, kappa=kappa),
                    AccuracySchedule(mode, p=p), None, nu)
    assert config_from_dict(json.loads(json.dumps(cfg.to_dict()))) == cfg


def test_missing_lambda_is_named():
    with pytest.raises(ConfigError) as err:
        config_from_dict({"engine": {"lambda_prime": 20}})
    assert "lambda" in err.value.key_path


@pytest.mark.parametrize("doc, key", [
    ({"engine": {"lambda": 40}, "extra": 1}, "extra"),
    ({"engine": {"lambda": 40, "lam": 40}}, "engine.lam"),
    ({"engine": {"lambda": 40}, "schedule": {"mode": "fixed", "size": 3}}, "schedule.size"),
    ({"engine": {"lambda": 40}, "schedule": {"mode": "exotic"}}, "schedule"),
    ({"engine": {"lambda": 41}}, "engine.lambda"),
    ({"engine": {"lambda": 40}, "nu": 1.5}, "nu"),
])
def test_config_errors(doc, key):
    with pytest.raises(ConfigError) as err:
        config_from_dict(doc)
    assert err.value.key_path == key


def test_unbounded_sigma_survives_json(tmp_path):
    cfg = RunConfig(engine=EngineConfig.symmetric(1.01))
    write_config(cfg, tmp_path / "c.json")
    assert read_config(tmp_path / "c.json").engine.sigma_max == math.inf


def small_config(tmp_path, **engine):
    cfg = RunConfig("constrained-quadratic", EngineConfig(budget=20, **engine),
                    AccuracySchedule(n_fixed=10), None, 0.95, seeds=10)
    path = tmp_path / "small.json"
    write_config(cfg, path)
    return path


def test_cli_run(tmp_path, capsys):
    path = small_config(tmp_path)
    assert main(["run", "--config", str(path), "--seed", "3", "--out",
                 str(tmp_path / "t.csv")]) == 0
    assert len(read_trace(tmp_path / "t.csv")) == 20
    summary = json.loads(capsys.readouterr().out)
    assert summary["seed"] == 3 and summary["iterations"] == 20


def test_cli_run_twice_is_byte_identical(tmp_path):
    path = small_config(tmp_path)
    for name in ("a", "b"):
        main(["run", "--config", str(path), "--seed", "5", "--out", str(tmp_path / name)])
    assert (tmp_path / "a").read_bytes() == (tmp_path / "b").read_bytes()


def test_cli_bench_and_audit(tmp_path, capsys):
    path = small_config(tmp_path)
    out = tmp_path / "bench"
    assert main(["bench", "--suite", str(path), "--seeds", "10", "--out-dir", str(out)]) == 0
    assert len(list(out.glob("seed-*.csv"))) == 10
    assert len(json.loads((out / "summary.json").read_text())["runs"]) == 10
    capsys.readouterr()
    assert main(["audit-lyapunov", "--traces", str(out), "--nu", "0.95"]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["seeds"] == 10 and len(report["buckets"]) == 2


def test_cli_audit_needs_ten_seeds(tmp_path):
    path = small_config(tmp_path)
    out = tmp_path / "bench"
    main(["bench", "--suite", str(path), "--seeds", "3", "--out-dir", str(out)])
    assert main(["audit-lyapunov", "--traces", str(out), "--nu", "0.95"]) == 2


def test_cli_check_accuracy(tmp_path, capsys):
    cfg = suite("accuracy")
    path = tmp_path / "acc.json"
    write_config(cfg, path)
    assert main(["check-accuracy", "--config", str(path), "--iters", "50"]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["audited"] == 50 and report["mode"] == "theoretical"


def test_cli_exit_codes(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text('{"engine": {"lambda": 40, "bogus": 1}}')
    assert main(["run", "--config", str(bad), "--out", str(tmp_path / "t.csv")]) == 1
    assert main(["run", "--config", "no-such-suite", "--out", str(tmp_path / "t.csv")]) == 1
    infeasible = tmp_path / "inf.json"
    infeasible.write_text(json.dumps({
        "problem": {"name": "constrained-quadratic", "ball_radius": 0.1},
        "engine": {"lambda": 40, "sigma0": 0.01, "budget": 3}}))
    # the origin is still inside a small ball, so force a runtime failure instead
    assert main(["run", "--config", str(infeasible), "--out",
                 str(tmp_path / "missing" / "t.csv")]) == 2
