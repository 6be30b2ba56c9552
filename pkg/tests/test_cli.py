import csv
import json

import numpy as np
import pytest

from seqcombine.cli import load_config, main
from seqcombine.survdata import Cohort, save_cohort_csv


def _write_config(tmp_path, **overrides):
    cfg = load_config("paper_table1")
    cfg.update(overrides)
    path = tmp_path / "config.json"
    path.write_text(json.dumps(cfg))
    return path, cfg


def _read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def test_bundled_config_loads():
    cfg = load_config("paper_table1")
    assert cfg["reps"] == 10000
    assert len(cfg["tests"]) == 11
    assert len(cfg["scenarios"]) == 4
    reduced = load_config("paper_table1_reduced")
    assert reduced["reps"] == 2000


def test_simulate_row_count(tmp_path):
    path, cfg = _write_config(tmp_path, reps=2)
    out = tmp_path / "out"
    rc = main(["simulate", "--config", str(path), "--out", str(out), "--threads", "1"])
    assert rc == 0
    rows = _read_csv(out / "table1.csv")
    n_tests = len(cfg["tests"])
    n_scen = len(cfg["scenarios"])
    assert n_tests * n_scen == 44
    assert len(rows) == 1 + 44
    assert rows[0] == ["scenario", "test", "reps", "rate", "mc_se", "avg_analyses", "flagged"]
    for name in ("null", "prop-haz", "log-odds", "non-prop-haz"):
        report = json.loads((out / f"report_{name}.json").read_text())
        assert report["reps"] == 2
        # Round trip: emitted JSON re-parses into an equal structure.
        assert json.loads(json.dumps(report)) == report


def test_simulate_rejects_zero_reps(tmp_path):
    path, _ = _write_config(tmp_path, reps=0)
    assert main(["simulate", "--config", str(path), "--out", str(tmp_path / "o")]) == 2


def test_simulate_rejects_missing_t_delay(tmp_path):
    cfg = load_config("paper_table1")
    del cfg["design"]["t_delay"]
    cfg["reps"] = 1
    path = tmp_path / "c.json"
    path.write_text(json.dumps(cfg))
    assert main(["simulate", "--config", str(path), "--out", str(tmp_path / "o")]) == 2
    # Without delayed-direction tests the same config is accepted.
    cfg["tests"] = ["logrank", "wilcoxon-I"]
    path.write_text(json.dumps(cfg))
    assert main(["simulate", "--config", str(path), "--out", str(tmp_path / "o"), "--threads", "1"]) == 0


def test_simulate_unknown_filters(tmp_path):
    path, _ = _write_config(tmp_path, reps=1)
    assert main(["simulate", "--config", str(path), "--scenario", "nope", "--out", str(tmp_path / "o")]) == 2
    assert main(["simulate", "--config", str(path), "--test", "anova", "--out", str(tmp_path / "o")]) == 2


def test_boundaries_single_look(tmp_path):
    cov = tmp_path / "cov.csv"
    cov.write_text("1.0\n")
    plan = tmp_path / "plan.json"
    plan.write_text(json.dumps({"fractions": [1.0], "alpha": 0.05}))
    out = tmp_path / "sched.json"
    rc = main(["boundaries", "--cov", str(cov), "--plan", str(plan), "--out", str(out)])
    assert rc == 0
    sched = json.loads(out.read_text())
    assert sched["crit"][0] == pytest.approx(1.9600, abs=1e-3)
    assert sched["method"] == "indinc"


def test_boundaries_brownian_matches_indinc(tmp_path):
    from seqcombine.boundaries import SpendingPlan, indinc_boundaries

    k = 5
    cov = np.minimum.outer(np.arange(1.0, k + 1), np.arange(1.0, k + 1))
    cov_path = tmp_path / "cov.csv"
    np.savetxt(cov_path, cov, delimiter=",")
    plan_path = tmp_path / "plan.json"
    plan_path.write_text(json.dumps({"fractions": [0.05, 0.1, 0.4, 0.7, 1.0], "alpha": 0.05}))
    out = tmp_path / "sched.json"
    assert main(["boundaries", "--cov", str(cov_path), "--plan", str(plan_path), "--out", str(out)]) == 0
    sched = json.loads(out.read_text())
    ref = indinc_boundaries(np.diag(cov), SpendingPlan(fractions=(0.05, 0.1, 0.4, 0.7, 1.0)))
    assert sched["method"] == "indinc"
    assert np.allclose(sched["crit"], ref.crit, atol=1e-12)


def test_boundaries_not_pd_exit_code(tmp_path):
    cov = tmp_path / "cov.csv"
    cov.write_text("1.0,2.0\n2.0,1.0\n")
    plan = tmp_path / "plan.json"
    plan.write_text(json.dumps({"fractions": [0.5, 1.0], "alpha": 0.05, "method": "mvn"}))
    rc = main(["boundaries", "--cov", str(cov), "--plan", str(plan)])
    assert rc == 4


def test_boundaries_bad_plan_exit_code(tmp_path):
    cov = tmp_path / "cov.csv"
    cov.write_text("1.0\n")
    plan = tmp_path / "plan.json"
    plan.write_text(json.dumps({"fractions": [0.9], "alpha": 0.05}))
    assert main(["boundaries", "--cov", str(cov), "--plan", str(plan)]) == 2


def _synthetic_cohort(n=400, effect=1.0, seed=2):
    rng = np.random.default_rng(seed)
    entry = rng.uniform(0, 2, n)
    arm = (rng.random(n) < 0.5).astype(np.int8)
    event = rng.exponential(1.0, n)
    event[arm == 1] *= effect
    return Cohort(entry, event, arm)


def test_analyze_empty_dataset(tmp_path, capsys):
    data = tmp_path / "empty.csv"
    data.write_text("entry_time,event_time,arm\n")
    rc = main(["analyze", "--data", str(data), "--test", "wilcoxon-I", "--look", "2"])
    assert rc == 0
    out = capsys.readouterr().out
    assert "no boundary crossing" in out
    assert "no-data" in out


def test_analyze_extreme_effect_rejects(tmp_path, capsys):
    cohort = _synthetic_cohort(n=600, effect=0.05)
    data = tmp_path / "data.csv"
    save_cohort_csv(cohort, data)
    rc = main(["analyze", "--data", str(data), "--test", "logrank", "--look", "5"])
    assert rc == 0
    out = capsys.readouterr().out
    assert "first crossing at look 1" in out


def test_analyze_replay_matches_all_at_once(tmp_path, capsys):
    cohort = _synthetic_cohort(n=500, effect=0.55)
    data = tmp_path / "data.csv"
    save_cohort_csv(cohort, data)
    state = tmp_path / "state.json"
    outs = []
    for look in range(1, 6):
        rc = main([
            "analyze", "--data", str(data), "--test", "rmst-II",
            "--look", str(look), "--state", str(state),
            "--out", str(tmp_path / f"look{look}.json"),
        ])
        assert rc == 0
        outs.append(json.loads((tmp_path / f"look{look}.json").read_text()))
    rc = main([
        "analyze", "--data", str(data), "--test", "rmst-II", "--look", "5",
        "--out", str(tmp_path / "all.json"),
    ])
    assert rc == 0
    alls = json.loads((tmp_path / "all.json").read_text())
    assert outs[-1] == alls
    # Idempotence: re-running the last look leaves the state identical.
    before = state.read_text()
    assert main(["analyze", "--data", str(data), "--test", "rmst-II", "--look", "5", "--state", str(state)]) == 0
    assert state.read_text() == before


def test_analyze_state_mismatch(tmp_path):
    cohort = _synthetic_cohort(n=300)
    data = tmp_path / "data.csv"
    save_cohort_csv(cohort, data)
    state = tmp_path / "state.json"
    assert main(["analyze", "--data", str(data), "--test", "wilcoxon-II", "--look", "2", "--state", str(state)]) == 0
    tampered = _synthetic_cohort(n=300, seed=3)
    save_cohort_csv(tampered, data)
    rc = main(["analyze", "--data", str(data), "--test", "wilcoxon-II", "--look", "3", "--state", str(state)])
    assert rc == 3
    # Wrong test against an existing state is also a data error.
    save_cohort_csv(cohort, data)
    rc = main(["analyze", "--data", str(data), "--test", "wilcoxon-I", "--look", "3", "--state", str(state)])
    assert rc == 3


def test_analyze_bad_schema(tmp_path):
    data = tmp_path / "bad.csv"
    data.write_text("a,b\n1,2\n")
    assert main(["analyze", "--data", str(data), "--test", "logrank", "--look", "1"]) == 3
