import json
from pathlib import Path

import numpy as np
import pytest
from pydantic import ValidationError
from typer.testing import CliRunner

from hybridsem.errors import ConfigError
from hybridsem.main import app, parse_ber, parse_snr
from hybridsem.schemas import ExperimentConfig, RunMetrics, SnrPointMetrics
from hybridsem.services.experiment import (
    COLUMNS,
    derive_seed,
    emit_results,
    full_scale,
    load_config,
    prepare,
    read_results,
    run_point,
    run_sweep,
    run_trial,
    save_config,
)

BASELINE = Path(__file__).resolve().parent.parent / "config" / "baseline.yaml"


def small(**kw) -> ExperimentConfig:
    data = dict(L=8, num_sentences=160, snr_points_db=[20.0, 25.0], trials=3, qos_trials=2, rng_seed=5)
    data.update(kw)
    return ExperimentConfig(**data)


def test_derive_seed_is_stable():
    a = np.random.default_rng(derive_seed(7, 2, 0, 1)).random(3)
    b = np.random.default_rng(derive_seed(7, 2, 0, 1)).random(3)
    c = np.random.default_rng(derive_seed(7, 2, 1, 0)).random(3)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_prepare_pads_and_sizes():
    ctx = prepare(small(num_sentences=157))
    assert ctx.real_count == 157
    assert ctx.P == 160
    assert ctx.sst_groups.shape == (8, 20)
    assert ctx.bandwidth == pytest.approx(2.5e6)
    assert ctx.gap == 1.0


def test_single_trial_matches_sweep():
    cfg = small(snr_points_db=[25.0], trials=1, qos_trials=1)
    r = run_trial(prepare(cfg), 0, 0, 0)
    m = run_sweep(cfg).points[0]
    assert m.trials_ok == 1
    assert m.mean_delay_s == r.delay
    assert m.utilization_pct == r.utilization
    assert m.improvement_pct == r.improvement


def test_association_does_not_change_baseline():
    sst, ost = prepare(small()), prepare(small(association="ost"))
    for s in range(2):
        for t in range(3):
            assert run_trial(sst, s, t, 0).baseline == run_trial(ost, s, t, 0).baseline


def test_shannon_sst_has_no_improvement():
    m = run_sweep(small(scheme="shannon"))
    assert all(p.improvement_pct == 0.0 for p in m.points)
    assert all(p.utilization_pct == 0.0 for p in m.points)


@pytest.mark.parametrize("problem", ["sum", "minmax"])
def test_hybrid_never_worse_than_baseline(problem):
    ctx = prepare(small(problem=problem))
    for s in range(2):
        for t in range(3):
            for q in range(2):
                r = run_trial(ctx, s, t, q)
                assert r.delay <= r.baseline
                assert r.improvement >= 0.0
                assert 0.0 <= r.utilization <= 100.0


def test_shannon_ost_not_worse_for_sum():
    ctx = prepare(small(scheme="shannon", association="ost"))
    for s in range(2):
        for t in range(3):
            r = run_trial(ctx, s, t, 0)
            assert r.delay <= r.baseline * (1 + 1e-9)


def test_point_counts():
    cfg = small()
    metrics, infeasible = run_point(prepare(cfg), 1)
    assert metrics.snr_db == 25.0
    assert metrics.trials_ok + metrics.trials_infeasible == 6
    assert len(infeasible) == metrics.trials_infeasible


def test_results_roundtrip(tmp_path):
    m = run_sweep(small())
    csv_path, txt_path = tmp_path / "r.csv", tmp_path / "r.yaml"
    emit_results(m, csv_path, "csv")
    emit_results(m, txt_path, "text")
    lines = csv_path.read_text(encoding="utf-8").splitlines()
    assert lines[0] == ",".join(COLUMNS)
    assert len(lines) == 3
    a, b = read_results(csv_path), read_results(txt_path)
    assert a.points == b.points
    for p, q in zip(a.points, m.points):
        assert p.snr_db == q.snr_db
        assert p.trials_ok == q.trials_ok
        assert p.mean_delay_s == pytest.approx(q.mean_delay_s, rel=1e-8)


def test_empty_results(tmp_path):
    path = tmp_path / "empty.csv"
    emit_results(RunMetrics(), path)
    assert path.read_text(encoding="utf-8") == ",".join(COLUMNS) + "\n"
    assert read_results(path).points == []


def test_results_are_byte_identical(tmp_path):
    cfg = small()
    emit_results(run_sweep(cfg), tmp_path / "a.csv")
    emit_results(run_sweep(cfg), tmp_path / "b.csv")
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


def test_workers_do_not_change_results():
    one = run_sweep(small(trials=2, qos_trials=1))
    two = run_sweep(small(trials=2, qos_trials=1, workers=2))
    assert one.points == two.points


def test_unknown_format(tmp_path):
    with pytest.raises(ConfigError):
        emit_results(RunMetrics(points=[SnrPointMetrics(snr_db=1.0, utilization_pct=0.0, improvement_pct=0.0,
                                                        mean_delay_s=1.0, trials_ok=1, trials_infeasible=0)]),
                     tmp_path / "x.out", "xml")  # type: ignore[arg-type]


def test_run_log_events(log_dir):
    run_sweep(small(trials=1, qos_trials=1), run_id="exp-events")
    files = list((log_dir / "runs").glob("*_exp-events.log"))
    assert len(files) == 1
    recs = [json.loads(line) for line in files[0].read_text(encoding="utf-8").splitlines()]
    kinds = [r["type"] for r in recs]
    assert kinds[0] == "sweep_start" and kinds[-1] == "sweep_end"
    assert kinds.count("point_start") == 2 and kinds.count("point_end") == 2
    assert all(r["run_id"] == "exp-events" and "ts" in r for r in recs)
    assert recs[0]["config"]["L"] == 8


def _event_kinds(log_dir, run_id):
    files = list((log_dir / "runs").glob(f"*_{run_id}.log"))
    assert len(files) == 1
    return [json.loads(line)["type"] for line in files[0].read_text(encoding="utf-8").splitlines()]


def test_run_log_events_same_with_workers(log_dir):
    cfg = small(trials=1, qos_trials=1, snr_points_db=[15.0, 20.0, 25.0])
    run_sweep(cfg, run_id="exp-serial")
    run_sweep(cfg.model_copy(update={"workers": 2}), run_id="exp-pool")
    serial = _event_kinds(log_dir, "exp-serial")
    assert serial.count("point_start") == 3
    assert _event_kinds(log_dir, "exp-pool") == serial


def test_no_log_without_run_id(log_dir):
    run_sweep(small(trials=1, qos_trials=1))
    assert not (log_dir / "runs").exists()


def test_config_roundtrip(tmp_path):
    cfg = small(ber=1e-3, association="ost", qos_granularity="sentence")
    save_config(cfg, tmp_path / "cfg.yaml")
    assert load_config(tmp_path / "cfg.yaml") == cfg


def test_shipped_config():
    cfg = load_config(BASELINE)
    assert cfg.L == 64 and cfg.k == 16 and cfg.num_sentences == 7296
    assert cfg.snr_points_db[0] == 10.0 and cfg.snr_points_db[-1] == 35.0
    assert len(cfg.snr_points_db) == 11
    assert cfg.qos_granularity == "stream"
    assert full_scale(cfg).trials == 500 and full_scale(cfg).qos_trials == 10


@pytest.mark.parametrize("bad", [
    {"qos_range": (0.0, 1.0)},
    {"qos_range": (0.9, 0.6)},
    {"ber": 0.3},
    {"word_range": (0, 4)},
    {"L": 0},
    {"snr_points_db": [float("nan")]},
    {"rng_seed": -1},
])
def test_config_validation(bad):
    with pytest.raises(ValidationError):
        ExperimentConfig(**bad)


def test_bad_config_file(tmp_path):
    path = tmp_path / "bad.yaml"
    path.write_text("L: -3\n", encoding="utf-8")
    with pytest.raises(ConfigError):
        load_config(path)
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.yaml")


def test_parse_snr():
    assert parse_snr("10:5:35") == [10.0, 15.0, 20.0, 25.0, 30.0, 35.0]
    assert parse_snr("10:2.5:15") == [10.0, 12.5, 15.0]
    assert parse_snr("25") == [25.0]
    for bad in ("a:b", "10:0:20", "10:5", "30:5:10"):
        with pytest.raises(ConfigError):
            parse_snr(bad)
    assert parse_ber("none") is None and parse_ber("1e-5") == 1e-5


def test_cli_sum(tmp_path):
    out = tmp_path / "sum.csv"
    result = CliRunner().invoke(app, ["sum", "--snr", "25", "--L", "8", "--trials", "1", "--qos-trials", "1",
                                      "--seed", "3", "--out", str(out)])
    assert result.exit_code == 0, result.output
    rows = out.read_text(encoding="utf-8").splitlines()
    assert rows[0] == ",".join(COLUMNS)
    assert rows[1].startswith("25,")


def test_cli_minmax_text(tmp_path):
    out = tmp_path / "mm.yaml"
    result = CliRunner().invoke(app, ["minmax", "--snr", "20:5:25", "--L", "8", "--trials", "1",
                                      "--qos-trials", "1", "--ber", "1e-3", "--assoc", "ost",
                                      "--format", "text", "--out", str(out)])
    assert result.exit_code == 0, result.output
    assert [p.snr_db for p in read_results(out, "text").points] == [20.0, 25.0]


def test_cli_rejects_bad_input(tmp_path):
    runner = CliRunner()
    assert runner.invoke(app, ["sum", "--snr", "a:b"]).exit_code == 2
    assert runner.invoke(app, ["sum", "--snr", "25", "--ber", "0.5", "--trials", "1"]).exit_code == 2
    assert runner.invoke(app, ["sum", "--snr", "25", "--format", "xml", "--trials", "1"]).exit_code == 2
    assert runner.invoke(app, ["sum", "--snr", "25", "--seed=-1", "--trials", "1"]).exit_code == 2
    assert runner.invoke(app, ["corpus", "--out", str(tmp_path / "c.jsonl"), "--P", "4", "--seed=-1"]).exit_code == 2


def test_cli_curve_and_corpus(tmp_path):
    runner = CliRunner()
    curves = tmp_path / "curves.yaml"
    assert runner.invoke(app, ["curve", "--k", "12", "--k", "16", "--out", str(curves)]).exit_code == 0
    assert curves.exists()
    corpus = tmp_path / "corpus.jsonl"
    result = runner.invoke(app, ["corpus", "--out", str(corpus), "--P", "20", "--L", "4", "--seed", "1"])
    assert result.exit_code == 0, result.output
    head = json.loads(corpus.read_text(encoding="utf-8").splitlines()[0])
    assert head == {"type": "corpus", "P": 20, "L": 4}
