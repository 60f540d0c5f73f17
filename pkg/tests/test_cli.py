import json

import pytest

from planner_doctor import data_path
from planner_doctor.cli import main
from planner_doctor.evaluation import evaluate
from planner_doctor.llm import API_KEY_ENV
from planner_doctor.planner import plan
from planner_doctor.prompts import RULE_OF_THUMB
from planner_doctor.scenario import Trajectory


def test_plan_writes_trajectory(tmp_path, capsys):
    out = tmp_path / "traj.json"
    assert main(["plan", "--out", str(out)]) == 0
    traj = Trajectory.from_dict(json.loads(out.read_text()))
    assert len(traj) == 34
    assert "J_A" in capsys.readouterr().out


def test_plan_to_stdout(capsys):
    assert main(["plan"]) == 0
    captured = capsys.readouterr()
    assert len(json.loads(captured.out)["states"]) == 34
    assert "J_A" in captured.err


def test_missing_scenario(tmp_path, capsys):
    assert main(["plan", "--scenario", str(tmp_path / "absent.json")]) == 2
    assert "error" in capsys.readouterr().err


def test_unknown_flag():
    with pytest.raises(SystemExit) as info:
        main(["plan", "--bogus"])
    assert info.value.code == 2


def test_domain_error(tmp_path):
    h = tmp_path / "h.txt"
    h.write_text("3 * bogus_feature")
    assert main(["plan", "--heuristic", str(h)]) == 1


def test_evaluate_pass_through(tmp_path, capsys, fixture_scenario, initial_config):
    out = tmp_path / "traj.json"
    main(["plan", "--out", str(out)])
    capsys.readouterr()
    assert main(["evaluate", "--trajectory", str(out)]) == 0
    report = json.loads(capsys.readouterr().out)
    scenario, problem = fixture_scenario
    expected = evaluate(plan(scenario, problem, initial_config).trajectory, scenario, problem).total
    assert abs(report["total"] - expected) <= 1e-9


def test_describe(tmp_path):
    out = tmp_path / "prompt.txt"
    assert main(["describe", "--target", "400", "--out", str(out)]) == 0
    assert RULE_OF_THUMB in out.read_text()


def test_repair_bundled_script(tmp_path, capsys):
    log = tmp_path / "session.jsonl"
    assert main(["repair", "--target", "400", "--log", str(log)]) == 0
    lines = log.read_text().splitlines()
    assert [json.loads(l)["type"] for l in lines] == ["iteration"] * 3 + ["outcome"]
    assert json.loads(capsys.readouterr().out)["stop_reason"] == "target_reached"


def test_repair_target_equal_initial(tmp_path, capsys, fixture_scenario, initial_config):
    scenario, problem = fixture_scenario
    j0 = evaluate(plan(scenario, problem, initial_config).trajectory, scenario, problem).total
    log = tmp_path / "session.jsonl"
    assert main(["repair", "--target", repr(j0), "--log", str(log)]) == 0
    assert json.loads(capsys.readouterr().out)["iterations"] == 0
    assert len(log.read_text().splitlines()) == 1


def test_repair_http_without_key(monkeypatch, capsys):
    monkeypatch.delenv(API_KEY_ENV, raising=False)
    code = main(["repair", "--target", "400", "--backend", "http", "--endpoint", "http://localhost:1/v1"])
    assert code == 1
    assert API_KEY_ENV in capsys.readouterr().err


def test_repair_bad_backend():
    assert main(["repair", "--target", "400", "--backend", "carrier-pigeon"]) == 2


def test_bench(tmp_path):
    out = tmp_path / "report.json"
    assert main(["bench", "--samples", "10", "--k", "1", "5", "10", "--out", str(out)]) == 0
    report = json.loads(out.read_text())
    assert set(report["pass_at_k"]) == {"pass@1", "pass@5", "pass@10"}
    assert report["cases"]["intersection"] == {"n": 10, "c": 5}


def test_bundled_manifest_exists():
    assert data_path("bench/manifest.json").is_file()
