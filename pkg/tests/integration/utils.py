"""Test utilities and helpers for integration testing."""

import csv
import json
from pathlib import Path
from typing import Any, Dict, List

TEST_DATA_DIR = Path(__file__).parent / "data"


def load_scenario(filename: str) -> Dict[str, Any]:
    """Parsed scenario from the test data directory, for tests that vary it.

    Raises:
        FileNotFoundError: If there is no such scenario
    """
    with open(TEST_DATA_DIR / filename, encoding="utf-8") as f:
        return json.load(f)


def write_scenario(directory: Path, name: str, scenario: Dict[str, Any]) -> str:
    """Write ``scenario`` as ``name`` under ``directory`` and return its path."""
    path = directory / name
    path.write_text(json.dumps(scenario), encoding="utf-8")
    return str(path)


def scenario_path(filename: str) -> str:
    """Path of a scenario file in the test data directory."""
    return str(TEST_DATA_DIR / filename)


def read_csv(path: Path) -> List[List[str]]:
    """All rows of a result CSV, header included."""
    with open(path, newline="", encoding="utf-8") as f:
        return list(csv.reader(f))


def read_jsonl(path: Path) -> List[Dict[str, Any]]:
    """All records of a JSON-lines result file."""
    with open(path, encoding="utf-8") as f:
        return [json.loads(line) for line in f if line.strip()]
