"""Result file writers.

CSV numbers carry 17 significant digits so that values round-trip exactly; every
file uses LF line endings regardless of platform.
"""

import csv
import json
from pathlib import Path
from typing import Any, Iterable, List, Mapping, Sequence

from structlog import get_logger

from ..models.core import Selector
from ..services.dynamics import EvolutionResult

logger = get_logger(__name__)

AMPLITUDE_COLUMNS = ("time", "configuration", "re", "im")
MARGINAL_COLUMNS = ("time", "selector", "value", "probability")
COMPLETION_COLUMNS = ("time", "probability")


def format_number(value: float) -> str:
    return f"{value:.17g}"


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> int:
    """Write rows, formatting floats with 17 significant digits.

    Returns:
        int: Number of data rows written
    """
    path.parent.mkdir(parents=True, exist_ok=True)
    count = 0
    with path.open("w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow(
                [
                    format_number(cell) if isinstance(cell, float) else cell
                    for cell in row
                ]
            )
            count += 1
    logger.debug("csv_written", path=str(path), rows=count)
    return count


def write_jsonl(path: Path, records: Iterable[Mapping[str, Any]]) -> int:
    """Write one compact JSON object per line."""
    path.parent.mkdir(parents=True, exist_ok=True)
    count = 0
    with path.open("w", encoding="utf-8", newline="\n") as handle:
        for record in records:
            handle.write(json.dumps(record, separators=(",", ":")) + "\n")
            count += 1
    logger.debug("jsonl_written", path=str(path), records=count)
    return count


def amplitude_rows(result: EvolutionResult) -> List[Sequence[Any]]:
    """(time, configuration, re, im) in time then basis order."""
    return [
        (time, text, float(re), float(im))
        for time, state in zip(result.times, result.states)
        for text, re, im in state.records()
    ]


def marginal_rows(
    result: EvolutionResult, selectors: Sequence[Selector]
) -> List[Sequence[Any]]:
    """(time, selector, value, probability) for each selector at each time."""
    rows: List[Sequence[Any]] = []
    for time, state in zip(result.times, result.states):
        for selector in selectors:
            selector = Selector(selector)
            for value, probability in state.marginal(selector).items():
                rows.append((time, selector.value, value, float(probability)))
    return rows
