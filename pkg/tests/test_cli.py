"""Tests for scenarios, the task catalogue and the command handler."""

import csv
import json
import math

import pytest
from pydantic import ValidationError

from src.cli import (
    CommandInvocation,
    CommandStatus,
    Scenario,
    ScenarioHandler,
    TaskCatalogue,
    get_command_specs,
)
from src.cli.models import InitialState
from src.config import Config
from src.main import build_parser
from src.models import ScenarioError

WALK_START = "p=0 k=0 t=0 l1=0 l2=0 c=1 j=0 s=00000000"
TINY_GEOMETRY = {"env_size": 1, "onboard_size": 1, "head_states": 1, "register_dim": 1}
TINY_START = "p=0 k=0 t=0 l1=0 l2=0 c=0 j=0 s=0"
EMPTY_RULES = {"computation": {"phase": "computation"}, "action": {"phase": "action"}}
STEP_RIGHT = {
    "computation": {"phase": "computation"},
    "action": {"phase": "action", "rules": [{"outcome": {"dj": 1}}]},
}


@pytest.fixture
def handler():
    """Create a scenario handler with default configuration."""
    return ScenarioHandler(Config())


@pytest.fixture
def write_scenario(tmp_path):
    """Write a scenario dictionary to a JSON file and return its path."""

    def write(data, name="scenario.json"):
        path = tmp_path / name
        path.write_text(json.dumps(data), encoding="utf-8")
        return str(path)

    return write


def _invoke(handler, command, **parameters):
    return handler.execute(CommandInvocation(command=command, parameters=parameters))


def _read_csv(path):
    with open(path, newline="", encoding="utf-8") as handle:
        return list(csv.reader(handle))


def _walk(**extra):
    return {"task": {"name": "walk", "parameters": {"env_size": 8}}, **extra}


def _rotate(phi, **extra):
    parameters = {"phi": phi, "env": "00", "onboard_size": 1}
    return {"task": {"name": "rotate", "parameters": parameters}, **extra}


def _parameter(entry, name):
    return next(item for item in entry["parameters"] if item["name"] == name)


def test_command_specs():
    """Test every subcommand is registered."""
    specs = get_command_specs()

    assert list(specs) == ["run", "validate", "trace", "tasks"]
    assert [p.flag for p in specs["run"].parameters][:2] == ["--scenario", "--out"]


def test_parser_builds_subcommands():
    """Test argparse options follow the command specifications."""
    argv = ["run", "--scenario", "s.json", "--strict", "--max-dim", "10"]

    args = build_parser().parse_args([*argv, "--method", "krylov"])

    assert args.command == "run"
    assert args.strict is True
    assert args.max_dim == 10
    assert args.method == "krylov"
    assert args.out == "."


@pytest.mark.parametrize(
    "data,message",
    [
        ({"geometry": TINY_GEOMETRY}, "exactly one of task, rules, operator"),
        ({**_walk(), "operator": []}, "exactly one of task, rules, operator"),
        ({"operator": []}, "geometry is required"),
        ({**_walk(), "times": [1.0, 0.5]}, "ascending"),
        ({**_walk(), "version": 2}, "version"),
        ({**_walk(), "colour": "blue"}, "colour"),
        (
            {"geometry": TINY_GEOMETRY, "rules": {**EMPTY_RULES, "final_outputs": [1]}},
            "final outputs",
        ),
    ],
)
def test_scenario_validation(data, message, write_scenario):
    """Test invalid scenarios are reported as scenario errors."""
    with pytest.raises(ScenarioError, match=message) as excinfo:
        Scenario.load(write_scenario(data))

    assert excinfo.value.exit_code == 2


def test_scenario_load_rejects_malformed_json(tmp_path):
    """Test JSON syntax errors name the position."""
    path = tmp_path / "broken.json"
    path.write_text('{"task": ', encoding="utf-8")

    with pytest.raises(ScenarioError, match="not valid JSON"):
        Scenario.load(path)


def test_scenario_load_missing_file(tmp_path):
    """Test unreadable scenario files are scenario errors."""
    with pytest.raises(ScenarioError, match="Cannot read"):
        Scenario.load(tmp_path / "missing.json")


def test_scenario_defaults(write_scenario):
    """Test defaults of an otherwise empty task scenario."""
    scenario = Scenario.load(write_scenario(_walk()))

    assert scenario.times == [0.0]
    assert scenario.basis == "reachable"
    assert scenario.max_steps == 1000
    assert [selector.value for selector in scenario.selectors] == [
        "robot_position",
        "control_bit",
        "output_register",
    ]
    assert scenario.outputs.amplitudes == "amplitudes.csv"


def test_initial_state_needs_exactly_one_form():
    """Test initial states give one form only."""
    with pytest.raises(ValidationError):
        InitialState()
    with pytest.raises(ValidationError):
        InitialState(configuration=TINY_START, environments={"0": 1.0})


def test_catalogue_lists_builtin_tasks():
    """Test the catalogue knows every built-in task."""
    catalogue = TaskCatalogue()

    assert catalogue.names() == [
        "cleanup",
        "conditional_rotate",
        "copy",
        "lookup",
        "rotate",
        "search_zeros",
        "shift",
        "walk",
    ]
    rotate = next(entry for entry in catalogue.describe() if entry["name"] == "rotate")
    assert _parameter(rotate, "phi")["required"] is True
    assert _parameter(rotate, "env")["default"] == "0000"


def test_catalogue_builds_complex_parameters():
    """Test [re, im] amplitudes become complex numbers."""
    parameters = {"a": [0.6, 0.0], "b": [0.0, 0.8], "env": "01"}

    task = TaskCatalogue().build("search_zeros", parameters)

    assert task.name == "search_zeros"
    assert task.parameters["b"] == [0.0, 0.8]


def test_catalogue_builds_lookup_table_from_json():
    """Test a lookup table given as plain JSON becomes the factory argument."""
    table = {"register_dim": 1, "entries": [[0, 0, 0, 0], [0, 0, 1, 0]]}

    task = TaskCatalogue().build("lookup", {"table": table})

    assert task.geometry.register_dim == 1


@pytest.mark.parametrize(
    "name,parameters,message",
    [
        ("teleport", {}, "Unknown task"),
        ("rotate", {}, "phi"),
        ("rotate", {"phi": "quarter"}, "phi"),
        ("walk", {"env_size": 4, "speed": 2}, "speed"),
    ],
)
def test_catalogue_rejects_bad_requests(name, parameters, message):
    """Test unknown tasks and malformed parameters are scenario errors."""
    with pytest.raises(ScenarioError, match=message):
        TaskCatalogue().build(name, parameters)


def test_execute_unknown_command(handler):
    """Test unknown commands fail with the scenario exit status."""
    response = _invoke(handler, "fly")

    assert response.status is CommandStatus.ERROR
    assert response.exit_code == 2


def test_execute_maps_unexpected_errors_to_internal_status(handler):
    """Test exceptions outside the simulator hierarchy exit with 70."""
    response = _invoke(handler, "tasks", bogus=1)

    assert response.exit_code == 70
    assert response.error.startswith("Internal error")


def test_run_walk_writes_results(handler, write_scenario, tmp_path):
    """Test a run writes amplitudes and marginals for every time."""
    out = tmp_path / "out"
    scenario = write_scenario(_walk(times=[0.0, 1.0]))

    response = _invoke(handler, "run", scenario=scenario, out=str(out))

    assert response.exit_code == 0
    assert response.result["dimension"] == 8
    assert response.result["method"] == "dense_eigen"
    amplitudes = _read_csv(out / "amplitudes.csv")
    assert amplitudes[0] == ["time", "configuration", "re", "im"]
    assert amplitudes[1] == ["0", WALK_START, "1", "0"]
    assert {row[0] for row in amplitudes[1:]} == {"0", "1"}
    marginals = _read_csv(out / "marginals.csv")
    assert marginals[1:4] == [
        ["0", "robot_position", "0", "1"],
        ["0", "control_bit", "1", "1"],
        ["0", "output_register", "0", "1"],
    ]
    assert not (out / "completion.csv").exists()


def test_run_flags_override_scenario(handler, write_scenario, tmp_path):
    """Test command-line flags win over scenario fields."""
    scenario = write_scenario(_walk(times=[0.5], method="dense_eigen"))

    out = str(tmp_path)

    response = _invoke(handler, "run", scenario=scenario, out=out, method="krylov")

    assert response.result["method"] == "krylov"


def test_run_capacity_error(handler, write_scenario, tmp_path):
    """Test a closure beyond max_dim exits with the capacity status."""
    scenario = write_scenario(_walk(max_dim=4))

    response = _invoke(handler, "run", scenario=scenario, out=str(tmp_path))

    assert response.exit_code == 3
    assert "CapacityError" in response.error


def test_run_random_environments_are_seeded(handler, write_scenario, tmp_path):
    """Test the same seed reproduces the same random start state."""
    initial = {"random_environments": ["00", "10", "01"]}
    scenario = write_scenario(_rotate(1.0, initial=initial))

    outputs = []
    for name, seed in (("a", 5), ("b", 5), ("c", 6)):
        _invoke(handler, "run", scenario=scenario, out=str(tmp_path / name), seed=seed)
        outputs.append((tmp_path / name / "amplitudes.csv").read_text(encoding="utf-8"))

    assert outputs[0] == outputs[1]
    assert outputs[0] != outputs[2]


def test_run_task_writes_completion(handler, write_scenario, tmp_path):
    """Test tasks with completion codes get a completion curve."""
    scenario = write_scenario(_rotate(math.pi, times=[0.0, 0.5]))

    response = _invoke(handler, "run", scenario=scenario, out=str(tmp_path))

    assert response.exit_code == 0
    rows = _read_csv(tmp_path / "completion.csv")
    assert rows[0] == ["time", "probability"]
    assert rows[1] == ["0", "0"]
    assert 0.0 <= float(rows[2][1]) <= 1.0


def test_empty_rules_evolve_by_a_global_phase(handler, write_scenario, tmp_path):
    """Test T = 0 gives H = 2K and a pure phase e^{-2iKt}."""
    scenario = write_scenario(
        {
            "geometry": TINY_GEOMETRY,
            "rules": EMPTY_RULES,
            "initial": {"configuration": TINY_START},
            "times": [1.0],
        }
    )

    response = _invoke(handler, "run", scenario=scenario, out=str(tmp_path))

    assert response.exit_code == 0
    (_, row) = _read_csv(tmp_path / "amplitudes.csv")
    assert row[1] == TINY_START
    assert float(row[2]) == pytest.approx(math.cos(2.0), abs=1e-12)
    assert float(row[3]) == pytest.approx(-math.sin(2.0), abs=1e-12)


def test_validate_clean_task(handler, write_scenario, tmp_path):
    """Test a built-in task validates cleanly with an empty violations file."""
    scenario = write_scenario(_walk())

    response = _invoke(handler, "validate", scenario=scenario, out=str(tmp_path))

    assert response.exit_code == 0
    assert response.result == {"dimension": 8, "violations": 0}
    assert (tmp_path / "violations.jsonl").read_text(encoding="utf-8") == ""


def test_validate_full_basis_of_inline_rules(handler, write_scenario, tmp_path):
    """Test rules without a start state are validated over the full basis."""
    geometry = {**TINY_GEOMETRY, "env_size": 2}
    scenario = write_scenario({"geometry": geometry, "rules": STEP_RIGHT})

    response = _invoke(handler, "validate", scenario=scenario, out=str(tmp_path))

    assert response.exit_code == 0
    assert response.result["dimension"] == 32


def test_trace_inline_rules(handler, write_scenario, tmp_path):
    """Test a trace stalls on a bounded edge and ends with a summary line."""
    scenario = write_scenario(
        {
            "geometry": {**TINY_GEOMETRY, "env_size": 3, "env_boundary": "bounded"},
            "rules": STEP_RIGHT,
            "initial": {"configuration": "p=0 k=0 t=0 l1=0 l2=0 c=1 j=0 s=000"},
        }
    )

    response = _invoke(handler, "trace", scenario=scenario, out=str(tmp_path))

    assert response.exit_code == 0
    text = (tmp_path / "trace.jsonl").read_text(encoding="utf-8")
    lines = [json.loads(line) for line in text.splitlines()]
    assert [line["configuration"][-9:] for line in lines[:-1]] == [
        "j=0 s=000",
        "j=1 s=000",
        "j=2 s=000",
    ]
    assert lines[0]["amplitude"] == [1.0, 0.0]
    assert lines[-1] == {
        "end": True,
        "steps": 2,
        "terminated": False,
        "truncated": False,
        "stalled": True,
    }


def test_trace_needs_rules(handler, write_scenario, tmp_path):
    """Test an explicit operator cannot be traced."""
    scenario = write_scenario(
        {
            "geometry": TINY_GEOMETRY,
            "operator": [],
            "initial": {"configuration": TINY_START},
        }
    )

    response = _invoke(handler, "trace", scenario=scenario, out=str(tmp_path))

    assert response.exit_code == 2


def test_tasks_command(handler):
    """Test the tasks command describes the catalogue."""
    response = _invoke(handler, "tasks")

    assert response.status is CommandStatus.SUCCESS
    assert len(response.result) == 8
