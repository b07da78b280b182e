import json
from pathlib import Path

import pytest

from conformal_zeros import theorems
from conformal_zeros.checks import Check
from conformal_zeros.cli import SEED_ENV, main

EXAMPLES = Path(__file__).resolve().parent.parent / "examples_scenarios"


def machine_records(text):
    return [json.loads(line) for line in text.splitlines()]


@pytest.fixture(autouse=True)
def _no_seed_env(monkeypatch):
    monkeypatch.delenv(SEED_ENV, raising=False)


@pytest.mark.parametrize("name", ["rotation.yaml", "neutral_counterexample.yaml"])
def test_examples_analyze_cleanly(name, capsys):
    assert main(["analyze", str(EXAMPLES / name), "--format", "machine"]) == 0
    records = machine_records(capsys.readouterr().out)
    assert records[0]["record"] == "scenario"
    assert records[-1]["record"] == "summary"
    assert records[-1]["checks_failed"] == 0 and records[-1]["task_errors"] == 0
    assert all(r["status"] == "ok" for r in records if r["record"] == "task")


def test_rotation_example_reports_one_nonessential_component(capsys):
    main(["analyze", str(EXAMPLES / "rotation.yaml"), "--format", "machine"])
    scan = [r for r in machine_records(capsys.readouterr().out) if r.get("kind") == "component-scan"][0]
    (comp,) = scan["result"]["components"]
    assert comp["kind"] == "nonessential"


def test_human_output_ends_with_summary(capsys):
    assert main(["analyze", str(EXAMPLES / "neutral_counterexample.yaml")]) == 0
    out = capsys.readouterr().out
    assert "exit status 0" in out.splitlines()[-1]


def test_out_writes_the_report_instead_of_stdout(tmp_path, capsys):
    target = tmp_path / "report.jsonl"
    assert main(["analyze", str(EXAMPLES / "rotation.yaml"), "--format", "machine", "--out", str(target)]) == 0
    assert capsys.readouterr().out == ""
    assert machine_records(target.read_text())[-1]["record"] == "summary"


def test_machine_output_is_deterministic(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for path in (a, b):
        main(["analyze", str(EXAMPLES / "neutral_counterexample.yaml"), "--format", "machine", "--out", str(path)])
    assert a.read_bytes() == b.read_bytes()


def test_bad_scenario_exits_2_with_location(tmp_path, capsys):
    bad = tmp_path / "bad.yaml"
    bad.write_text("space: {n: 3, p: 2, q: 0}\nfield: dilation\n")
    assert main(["analyze", str(bad)]) == 2
    err = capsys.readouterr().err
    assert f"{bad}:1:" in err and "does not equal" in err


def test_missing_scenario_file_exits_2(tmp_path):
    assert main(["analyze", str(tmp_path / "absent.yaml")]) == 2


def test_usage_errors_exit_2(capsys):
    for argv in (["verify", "no-such-theorem"], ["frobnicate"], []):
        with pytest.raises(SystemExit) as info:
            main(argv)
        assert info.value.code == 2
    capsys.readouterr()


def test_seed_comes_from_environment(monkeypatch, capsys):
    monkeypatch.setenv(SEED_ENV, "0")
    main(["analyze", str(EXAMPLES / "rotation.yaml"), "--format", "machine"])
    assert machine_records(capsys.readouterr().out)[0]["environment"]["seed"] == 0
    # the command line flag beats the environment
    main(["analyze", str(EXAMPLES / "rotation.yaml"), "--format", "machine", "--seed", "5"])
    assert machine_records(capsys.readouterr().out)[0]["environment"]["seed"] == 5
    main(["verify", "charp", "--format", "machine"])
    assert machine_records(capsys.readouterr().out)[0]["environment"]["seed"] == 0


def test_invalid_seed_environment_exits_2(monkeypatch, capsys):
    monkeypatch.setenv(SEED_ENV, "many")
    assert main(["analyze", str(EXAMPLES / "rotation.yaml")]) == 2
    assert SEED_ENV in capsys.readouterr().err


def test_verify_single_suite(capsys):
    assert main(["verify", "charp", "--format", "machine"]) == 0
    records = machine_records(capsys.readouterr().out)
    (thm,) = [r for r in records if r["record"] == "theorem"]
    assert thm["theorem"] == "charp" and thm["status"] == "pass"
    assert records[-1]["theorems"] == 1


def test_verify_on_scenario_field(capsys):
    assert main(["verify", "charp", "--scenario", str(EXAMPLES / "neutral_counterexample.yaml"), "--format", "machine"]) == 0
    (thm,) = [r for r in machine_records(capsys.readouterr().out) if r["record"] == "theorem"]
    assert thm["status"] == "pass"
    assert thm["data"]["component-0"]["dim_ker_J"] == [2, 1]


def _failing_suite(space=None, f=None, seed=42, tol=1e-9):
    return theorems.TheoremResult("tnv", [Check("planted-failure", False, {"residual": 1.0, "tol": tol})])


def test_failing_suite_gates_exit_status(monkeypatch, capsys, tmp_path):
    monkeypatch.setitem(theorems.SUITES, "tnv", _failing_suite)
    assert main(["verify", "tnv", "--format", "machine"]) == 1
    assert machine_records(capsys.readouterr().out)[-1]["checks_failed"] == 1
    scenario = tmp_path / "gate.yaml"
    scenario.write_text("field: rotation(n=3)\ntasks:\n  - {kind: verify-theorem, name: tnv}\n  - {kind: char-poly, at: [0, 0, 0]}\n")
    assert main(["analyze", str(scenario)]) == 1


def test_task_error_does_not_stop_the_run(tmp_path, capsys):
    scenario = tmp_path / "err.yaml"
    scenario.write_text("field: dilation(n=3)\ntasks:\n  - {kind: classify, at: [1, 1, 1]}\n  - {kind: char-poly, at: [0, 0, 0]}\n")
    assert main(["analyze", str(scenario), "--format", "machine"]) == 0
    tasks = [r for r in machine_records(capsys.readouterr().out) if r["record"] == "task"]
    assert [t["status"] for t in tasks] == ["error", "ok"]
    assert "not a zero" in tasks[0]["error"]


def test_compare_decides_and_reports(capsys):
    rot = str(EXAMPLES / "rotation.yaml")
    assert main(["compare", rot, rot, "--at", "0,0,0", "--at", "0,0,0.5", "--format", "machine"]) == 0
    rec = machine_records(capsys.readouterr().out)[0]
    assert rec["record"] == "comparison" and rec["verdict"]["status"] == "equivalent"


def test_compare_refutes_different_fields(tmp_path, capsys):
    dil = tmp_path / "dil.yaml"
    dil.write_text("field: dilation(n=3)\n")
    rot = str(EXAMPLES / "rotation.yaml")
    assert main(["compare", rot, str(dil), "--at", "0,0,0", "--at", "0,0,0", "--format", "machine"]) == 0
    assert machine_records(capsys.readouterr().out)[0]["verdict"]["status"] == "inequivalent"


def test_compare_input_errors_exit_2(capsys):
    rot = str(EXAMPLES / "rotation.yaml")
    # not a zero of the rotation
    assert main(["compare", rot, rot, "--at", "1,0,0", "--at", "0,0,0"]) == 2
    assert main(["compare", rot, rot, "--at", "0,0", "--at", "0,0,0"]) == 2
    assert main(["compare", rot, rot, "--at", "0,0,0"]) == 2
    with pytest.raises(SystemExit):
        main(["compare", rot, rot, "--at", "x,y"])
    capsys.readouterr()


def test_module_entry_point():
    import subprocess
    import sys

    out = subprocess.run([sys.executable, "-m", "conformal_zeros", "verify", "charp"], capture_output=True, text=True)
    assert out.returncode == 0 and "charp" in out.stdout
