"""End-to-end tests of the qrobot command line.

Each test runs ``main`` on a scenario from ``data/`` and checks the exit status and
the result files it leaves behind.
"""

import math

import pytest
from structlog.testing import capture_logs

from src.main import main

from .utils import (
    load_scenario,
    read_csv,
    read_jsonl,
    scenario_path,
    write_scenario,
)


@pytest.fixture
def out_dir(tmp_path):
    """Directory for result files."""
    return tmp_path / "results"


@pytest.fixture
def keep_log_capture(monkeypatch):
    """Stop main from replacing the structlog configuration of capture_logs."""
    monkeypatch.setattr("src.main.configure_logging", lambda settings: None)


def _run(*argv):
    return main([str(arg) for arg in argv])


def test_run_rotate_writes_all_result_files(out_dir):
    """Test a task run writes amplitudes, marginals and a completion curve."""
    scenario = scenario_path("rotate_pi.json")

    exit_code = _run("run", "--scenario", scenario, "--out", out_dir)

    assert exit_code == 0
    amplitudes = read_csv(out_dir / "amplitudes.csv")
    assert amplitudes[0] == ["time", "configuration", "re", "im"]
    assert {row[0] for row in amplitudes[1:]} == {"0", "0.5", "1"}
    completion = read_csv(out_dir / "completion.csv")
    assert completion[1] == ["0", "0"]
    assert len(completion) == 4
    marginals = read_csv(out_dir / "marginals.csv")
    for time in ("0", "0.5", "1"):
        control = [row for row in marginals if row[:2] == [time, "control_bit"]]
        total = sum(float(row[3]) for row in control)
        assert total == pytest.approx(1.0, abs=1e-9)


def test_run_honours_output_file_names(tmp_path, out_dir):
    """Test the scenario's outputs section renames the result files."""
    scenario = load_scenario("rotate_pi.json")
    scenario["outputs"] = {"amplitudes": "psi.csv", "completion": "done.csv"}
    path = write_scenario(tmp_path, "renamed.json", scenario)

    assert _run("run", "--scenario", path, "--out", out_dir) == 0
    assert sorted(p.name for p in out_dir.iterdir()) == [
        "done.csv",
        "marginals.csv",
        "psi.csv",
    ]
    assert read_csv(out_dir / "done.csv")[0] == ["time", "probability"]


def test_run_is_reproducible_for_a_seed(tmp_path):
    """Test random start amplitudes follow the scenario seed."""
    scenario = scenario_path("rotate_random.json")

    for name in ("first", "second"):
        assert _run("run", "--scenario", scenario, "--out", tmp_path / name) == 0
    _run("run", "--scenario", scenario, "--out", tmp_path / "reseeded", "--seed", 8)

    first = (tmp_path / "first" / "amplitudes.csv").read_bytes()
    assert first == (tmp_path / "second" / "amplitudes.csv").read_bytes()
    assert first != (tmp_path / "reseeded" / "amplitudes.csv").read_bytes()
    assert b"\r\n" not in first


def test_run_empty_rules_gives_global_phase(out_dir):
    """Test a robot with no rules only picks up the phase e^{-2iKt}."""
    scenario = scenario_path("empty_rules.json")

    exit_code = _run("run", "--scenario", scenario, "--out", out_dir)

    assert exit_code == 0
    ((time, configuration, re, im),) = read_csv(out_dir / "amplitudes.csv")[1:]
    assert time == "1"
    assert configuration == "p=0 k=0 t=0 l1=0 l2=0 c=0 j=0 s=0"
    assert float(re) == pytest.approx(math.cos(2.0), abs=1e-12)
    assert float(im) == pytest.approx(-math.sin(2.0), abs=1e-12)


def test_validate_empty_rules_is_clean(out_dir):
    """Test the zero operator satisfies every structural condition."""
    scenario = scenario_path("empty_rules.json")

    assert _run("validate", "--scenario", scenario, "--out", out_dir) == 0
    assert read_jsonl(out_dir / "violations.jsonl") == []


def test_validate_reports_planted_defect(out_dir, keep_log_capture):
    """Test a two-site jump of the environment head is reported."""
    scenario = scenario_path("planted_defect.json")

    with capture_logs() as logs:
        exit_code = _run("validate", "--scenario", scenario, "--out", out_dir)

    assert exit_code == 1
    reports = read_jsonl(out_dir / "violations.jsonl")
    assert "env_locality" in {report["condition"] for report in reports}
    assert any(log["event"] == "violations_written" for log in logs)


def test_strict_run_refuses_defective_operator(out_dir):
    """Test --strict stops before evolving an operator with violations."""
    scenario = scenario_path("planted_defect.json")

    assert _run("run", "--scenario", scenario, "--out", out_dir, "--strict") == 1
    assert (out_dir / "violations.jsonl").exists()
    assert not (out_dir / "amplitudes.csv").exists()


def test_lenient_run_evolves_defective_operator(out_dir, keep_log_capture):
    """Test violations only warn without --strict."""
    scenario = scenario_path("planted_defect.json")

    with capture_logs() as logs:
        exit_code = _run("run", "--scenario", scenario, "--out", out_dir)

    assert exit_code == 0
    assert (out_dir / "amplitudes.csv").exists()
    assert any(log["event"] == "structural_violations" for log in logs)


def test_trace_halting_search(out_dir):
    """Test a search that reaches the 1 terminates."""
    scenario = scenario_path("search_halting.json")

    exit_code = _run("trace", "--scenario", scenario, "--out", out_dir)

    assert exit_code == 0
    records = read_jsonl(out_dir / "trace.jsonl")
    end = records[-1]
    assert end["end"] is True
    assert end["terminated"] is True
    assert end["steps"] == 11
    assert len(records) == end["steps"] + 2
    assert records[-2]["configuration"].endswith("s=1111")


def test_trace_non_halting_search_is_truncated(out_dir):
    """Test a search over an all-zero ring runs into the step cap."""
    scenario = scenario_path("search_non_halting.json")

    assert _run("trace", "--scenario", scenario, "--out", out_dir) == 0
    end = read_jsonl(out_dir / "trace.jsonl")[-1]
    assert end == {
        "end": True,
        "steps": 40,
        "terminated": False,
        "truncated": True,
        "stalled": False,
    }


def test_trace_max_steps_flag_overrides_scenario(out_dir):
    """Test --max-steps replaces the scenario's step cap."""
    scenario = scenario_path("search_non_halting.json")
    argv = ["trace", "--scenario", scenario, "--out", out_dir]

    exit_code = _run(*argv, "--max-steps", 5)

    assert exit_code == 0
    assert read_jsonl(out_dir / "trace.jsonl")[-1]["steps"] == 5


def test_trace_of_branching_search_fails(out_dir):
    """Test a superposing rule cannot be traced classically."""
    scenario = scenario_path("search_superposed.json")

    assert _run("trace", "--scenario", scenario, "--out", out_dir) == 4


@pytest.mark.parametrize(
    "filename,exit_code",
    [
        ("task_and_operator.json", 2),
        ("unknown_task.json", 2),
        ("missing.json", 2),
        ("walk_over_capacity.json", 3),
    ],
)
def test_failures_map_to_exit_codes(filename, exit_code, out_dir, capsys):
    """Test each error family has its own exit status and a message on stderr."""
    scenario = scenario_path(filename)

    assert _run("run", "--scenario", scenario, "--out", out_dir) == exit_code
    assert "error" in capsys.readouterr().err


def test_tasks_lists_catalogue(capsys):
    """Test the tasks command prints the built-in tasks."""
    assert _run("tasks") == 0

    output = capsys.readouterr().out
    for name in ("rotate", "search_zeros", "walk"):
        assert name in output
