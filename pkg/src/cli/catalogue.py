"""Catalogue of built-in tasks addressable from scenario files."""

import inspect
from typing import Any, Callable, Dict, List, Mapping

from pydantic import BaseModel, ConfigDict, ValidationError, validate_call
from structlog import get_logger

from ..models.errors import ScenarioError
from ..services.tasks import (
    TaskSpec,
    make_cleanup_task,
    make_conditional_rotate_task,
    make_copy_task,
    make_lookup_task,
    make_rotate_task,
    make_search_zeros_task,
    make_shift_task,
    make_walk_task,
)
from .models import CommandParameter, to_complex

logger = get_logger(__name__)

_COMPLEX_PARAMETERS = ("a", "b")


class TaskEntry(BaseModel):
    """A task factory with its documented parameters."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    name: str
    description: str
    factory: Callable[..., TaskSpec]

    @property
    def parameters(self) -> List[CommandParameter]:
        """Parameters read off the factory signature."""
        signature = inspect.signature(self.factory)
        return [
            CommandParameter(
                name=name,
                type=_type_name(parameter.annotation),
                description=f"{self.name} parameter {name}",
                required=parameter.default is inspect.Parameter.empty,
                default=(
                    None
                    if parameter.default is inspect.Parameter.empty
                    else parameter.default
                ),
            )
            for name, parameter in signature.parameters.items()
        ]


def _type_name(annotation: Any) -> str:
    if isinstance(annotation, type):
        return annotation.__name__
    return str(annotation).replace("typing.", "")


class TaskCatalogue:
    """Provider of the built-in tasks."""

    def __init__(self):
        """Initialize the catalogue with every built-in task."""
        self.entries = self._init_entries()

    def _init_entries(self) -> Dict[str, TaskEntry]:
        entries = [
            TaskEntry(
                name="rotate",
                description="Rotate the qubit under the robot by phi (no observation)",
                factory=make_rotate_task,
            ),
            TaskEntry(
                name="conditional_rotate",
                description=(
                    "Rotate the qubit by phi if it is 0, else move to the next site"
                ),
                factory=make_conditional_rotate_task,
            ),
            TaskEntry(
                name="search_zeros",
                description="Rewrite a chain of 0s to a|0> + b|1> until a 1 is found",
                factory=make_search_zeros_task,
            ),
            TaskEntry(
                name="copy",
                description="Copy a region into a clean copy region (basis-relative)",
                factory=make_copy_task,
            ),
            TaskEntry(
                name="cleanup",
                description=(
                    "Reset a region to a pattern, keeping its contents in a copy region"
                ),
                factory=make_cleanup_task,
            ),
            TaskEntry(
                name="shift",
                description=(
                    "Shift a region's pattern by an offset if the destination is free"
                ),
                factory=make_shift_task,
            ),
            TaskEntry(
                name="lookup",
                description="Custom lookup-table computation with a hand-back action",
                factory=make_lookup_task,
            ),
            TaskEntry(
                name="walk",
                description="Free walk of the robot along a clean lattice",
                factory=make_walk_task,
            ),
        ]
        return {entry.name: entry for entry in entries}

    def names(self) -> List[str]:
        return sorted(self.entries)

    def get(self, name: str) -> TaskEntry:
        """Look up a task.

        Raises:
            ScenarioError: If no task has that name
        """
        entry = self.entries.get(name)
        if entry is None:
            raise ScenarioError(
                f"Unknown task {name!r}; available: {', '.join(self.names())}",
                task=name,
            )
        return entry

    def build(self, name: str, parameters: Mapping[str, Any]) -> TaskSpec:
        """Instantiate a task from scenario parameters.

        Raises:
            ScenarioError: If the task is unknown or a parameter is missing or malformed
        """
        entry = self.get(name)
        arguments = dict(parameters)
        for key in _COMPLEX_PARAMETERS:
            if isinstance(arguments.get(key), (list, tuple)):
                arguments[key] = to_complex(arguments[key])
        factory = validate_call(entry.factory)
        try:
            task = factory(**arguments)
        except ValidationError as e:
            problems = "; ".join(
                f"{'.'.join(str(part) for part in error['loc'])}: {error['msg']}"
                for error in e.errors()
            )
            raise ScenarioError(
                f"Bad parameters for task {name}: {problems}", task=name
            ) from e
        logger.debug("task_built", task=name, register_dim=task.geometry.register_dim)
        return task

    def describe(self) -> List[Dict[str, Any]]:
        """Name, description and parameters of every task, sorted by name."""
        return [
            {
                "name": entry.name,
                "description": entry.description,
                "parameters": [
                    parameter.model_dump(mode="json") for parameter in entry.parameters
                ],
            }
            for entry in sorted(self.entries.values(), key=lambda entry: entry.name)
        ]
